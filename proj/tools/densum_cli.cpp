#include <CLI11.hpp>
#include <httplib.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "densum/densum.h"

namespace {

struct StringDeleter {
    void operator()(densum_string* s) const { densum_string_free(s); }
};
using OwnedString = std::unique_ptr<densum_string, StringDeleter>;

struct ConfigDeleter {
    void operator()(densum_config* c) const { densum_config_free(c); }
};

// Thrown to leave a subcommand with a specific exit status.
struct Exit {
    int code;
};

void check(densum_status status) {
    if (status == DENSUM_OK) return;
    std::cerr << "densum: " << densum_last_error() << "\n";
    throw Exit{1};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "densum: cannot open '" << path << "'\n";
        throw Exit{1};
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_output(const std::string& path, std::string_view text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << "\n";
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "densum: cannot write '" << path << "'\n";
        throw Exit{1};
    }
    out << text;
}

std::string view(const OwnedString& s) { return std::string(densum_string_data(s.get()), densum_string_size(s.get())); }

densum_method method_from(const std::string& name) {
    if (name == "hoeffding") return DENSUM_METHOD_HOEFFDING;
    if (name == "u" || name == "u_sharp") return DENSUM_METHOD_U_SHARP;
    if (name == "bernstein") return DENSUM_METHOD_BERNSTEIN;
    if (name == "wald") return DENSUM_METHOD_WALD;
    return DENSUM_METHOD_HOEFFDING_RATIO;
}


std::string join(const std::vector<double>& v) {
    std::string out;
    char buf[32];
    for (const double d : v) {
        std::snprintf(buf, sizeof buf, "%.17g", d);
        out += (out.empty() ? "" : ",") + std::string(buf);
    }
    return out;
}

// Seed from DENSUM_SEED when set, else the flag value.
std::optional<std::string> seed_override() {
    if (const char* env = std::getenv("DENSUM_SEED"); env && *env) return std::string(env);
    return std::nullopt;
}

struct FitFlags {
    std::string response;
    std::vector<std::string> covariates;
    bool no_intercept = false;
    double alpha = 0.05;
    std::string range = "residual";
    std::vector<std::string> partitions;
    std::string focus;
    std::uint64_t seed = 0;

    std::vector<const char*> cov_ptrs, part_ptrs;

    densum_fit_options options() {
        cov_ptrs.clear();
        part_ptrs.clear();
        for (const auto& c : covariates) cov_ptrs.push_back(c.c_str());
        for (const auto& p : partitions) part_ptrs.push_back(p.c_str());
        if (const auto env = seed_override()) seed = std::stoull(*env);
        return densum_fit_options{response.c_str(), cov_ptrs.data(), cov_ptrs.size(), no_intercept ? 0 : 1,
                                  alpha,           range.c_str(),   part_ptrs.data(), part_ptrs.size(),
                                  focus.c_str(),   seed};
    }
};

void add_fit_flags(CLI::App* cmd, FitFlags& f, bool response_required) {
    auto* r = cmd->add_option("--response,-y", f.response, "Response column");
    if (response_required) r->required();
    cmd->add_option("--covariates,-x", f.covariates, "Covariate columns")->delimiter(',');
    cmd->add_flag("--no-intercept", f.no_intercept, "Fit without an intercept column");
    cmd->add_option("--alpha", f.alpha, "Error level of the confidence sets")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--range", f.range, "Range source: known=R | residual | two-mean | marginal=R");
    cmd->add_option("--partition", f.partitions, "Cluster label column or seq:K (repeatable)");
    cmd->add_option("--focus", f.focus, "Covariate whose estimate drives the 10% retention screen");
    cmd->add_option("--seed", f.seed, "Seed recorded in the report provenance");
}

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (scheme_end == std::string::npos) {
        std::cerr << "densum: '" << url << "' is not an http(s) URL\n";
        throw Exit{1};
    }
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string fetch(const std::string& url) {
    const Url u = split_url(url);
    httplib::Client client(u.origin);
    if (!client.is_valid()) {
        std::cerr << "densum: unsupported URL '" << url << "'\n";
        throw Exit{2};
    }
    client.set_follow_location(true);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    const auto res = client.Get(u.path);
    if (!res) {
        std::cerr << "densum: cannot reach " << url << ": " << httplib::to_string(res.error()) << "\n";
        throw Exit{2};
    }
    if (res->status != 200) {
        std::cerr << "densum: " << url << " returned HTTP " << res->status << "\n";
        throw Exit{2};
    }
    return res->body;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Confidence sets for dependent sums with U-class errors"};
    app.require_subcommand(1);
    app.set_version_flag("--version", densum_version());

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run a coverage experiment (tables 1-3) and write CSV");
    int table = 0;
    std::string sim_config, sim_out;
    std::vector<std::size_t> sim_n;
    std::vector<double> sim_phi, sim_phi_star, sim_shapes;
    std::optional<double> sim_alpha, sim_c_star;
    std::optional<std::size_t> sim_reps;
    std::optional<std::uint64_t> sim_seed;
    std::optional<unsigned> sim_threads;
    sim->add_option("--table", table, "Experiment table: 1, 2 or 3")->required()->check(CLI::Range(1, 3));
    sim->add_option("--config", sim_config, "Config file with [analysis] and [tableN] sections");
    sim->add_option("--n", sim_n, "Sample sizes")->delimiter(',');
    sim->add_option("--phi", sim_phi, "Average correlations (table 1)")->delimiter(',');
    sim->add_option("--phi-star", sim_phi_star, "Dependence levels phi* (table 3)")->delimiter(',');
    sim->add_option("--alpha-shape", sim_shapes, "Beta shapes (table 2)")->delimiter(',');
    sim->add_option("--alpha", sim_alpha, "Error level");
    sim->add_option("--c-star", sim_c_star, "Constant c* in the simulation exponent");
    sim->add_option("--reps", sim_reps, "Monte Carlo replications per row");
    sim->add_option("--seed", sim_seed, "Base seed (DENSUM_SEED overrides)");
    sim->add_option("--threads", sim_threads, "Worker threads (0: all cores)");
    sim->add_option("--out", sim_out, "Output CSV path (default stdout)");

    // ci
    auto* ci = app.add_subcommand("ci", "Confidence set for the mean of one column");
    std::string ci_file, ci_column, ci_method = "u", ci_range = "residual", ci_out;
    double ci_alpha = 0.05;
    bool ci_json = false;
    ci->add_option("file", ci_file, "Input CSV")->required();
    ci->add_option("--column,-c", ci_column, "Numeric column")->required();
    ci->add_option("--method", ci_method, "hoeffding | u | bernstein | wald | ratio")
        ->check(CLI::IsMember({"hoeffding", "u", "u_sharp", "bernstein", "wald", "ratio", "hoeffding_ratio"}));
    ci->add_option("--range", ci_range, "Range source: known=R | residual | two-mean | marginal=R");
    ci->add_option("--alpha", ci_alpha, "Error level")->check(CLI::Range(0.0, 1.0));
    ci->add_flag("--json", ci_json, "Print JSON instead of text");
    ci->add_option("--out", ci_out, "Write the JSON report to this path as well");

    // fit
    auto* fit = app.add_subcommand("fit", "Least-squares fit with residual-range confidence sets and diagnostics");
    std::string fit_file, fit_json_out, fit_format = "text";
    FitFlags fit_flags;
    fit->add_option("file", fit_file, "Input CSV")->required();
    add_fit_flags(fit, fit_flags, true);
    fit->add_option("--format", fit_format, "text | json")->check(CLI::IsMember({"text", "json"}));
    fit->add_option("--json-out", fit_json_out, "Write the JSON report to this path");

    // diagnose
    auto* diag = app.add_subcommand("diagnose", "U-class, autocorrelation and plot data for one series");
    std::string diag_file, diag_column, diag_coef, diag_format = "text", diag_plot;
    std::size_t diag_bins = 0;
    FitFlags diag_fit;
    diag->add_option("file", diag_file, "Input CSV")->required();
    diag->add_option("--column,-c", diag_column, "Diagnose this column directly");
    add_fit_flags(diag, diag_fit, false);
    diag->add_option("--coefficient", diag_coef, "Weighted residuals of this coefficient (default: residuals)");
    diag->add_option("--bins", diag_bins, "Histogram bins (default: Sturges)");
    diag->add_option("--format", diag_format, "text | json | csv")->check(CLI::IsMember({"text", "json", "csv"}));
    diag->add_option("--plot-csv", diag_plot, "Write plot-ready CSV to this path");

    // prepare
    auto* prep = app.add_subcommand("prepare", "Lag, log-transform and add season dummies to climate rows");
    std::string prep_file, prep_unit = "monthly", prep_out;
    prep->add_option("file", prep_file, "Climate CSV: date,temp,co2[,index]")->required();
    prep->add_option("--unit", prep_unit, "monthly | yearly")->check(CLI::IsMember({"monthly", "yearly"}));
    prep->add_option("--out", prep_out, "Output CSV path (default stdout)");

    // fetch-climate
    auto* fetch_cmd = app.add_subcommand("fetch-climate", "Download and normalize the monthly temperature and CO2 series");
    std::string temp_url = "https://data.giss.nasa.gov/gistemp/tabledata_v4/GLB.Ts+dSST.csv";
    std::string co2_url = "https://gml.noaa.gov/webdata/ccgg/trends/co2/co2_mm_gl.csv";
    std::string fetch_dir = ".";
    fetch_cmd->add_option("--temp-url", temp_url, "GISTEMP-style table of monthly anomalies");
    fetch_cmd->add_option("--co2-url", co2_url, "NOAA-style monthly CO2 table");
    fetch_cmd->add_option("--out-dir", fetch_dir, "Directory for temp.csv, co2.csv and climate.csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*sim) {
            densum_config* raw = nullptr;
            check(densum_config_new(table, &raw));
            std::unique_ptr<densum_config, ConfigDeleter> cfg(raw);
            if (!sim_config.empty()) check(densum_config_load(cfg.get(), read_file(sim_config).c_str()));
            auto set = [&](const char* key, const std::string& value) {
                check(densum_config_set(cfg.get(), key, value.c_str()));
            };
            if (!sim_n.empty()) {
                std::string s;
                for (const auto n : sim_n) s += (s.empty() ? "" : ",") + std::to_string(n);
                set("n", s);
            }
            if (!sim_phi.empty()) set("phi", join(sim_phi));
            if (!sim_phi_star.empty()) set("phi_star", join(sim_phi_star));
            if (!sim_shapes.empty()) set("alpha_shape", join(sim_shapes));
            if (sim_alpha) set("alpha", join(std::vector<double>{*sim_alpha}));
            if (sim_c_star) set("c_star", join(std::vector<double>{*sim_c_star}));
            if (sim_reps) set("reps", std::to_string(*sim_reps));
            if (sim_seed) set("seed", std::to_string(*sim_seed));
            if (const auto env = seed_override()) set("seed", *env);
            if (sim_threads) set("threads", std::to_string(*sim_threads));
            check(densum_config_validate(cfg.get()));
            densum_string* csv = nullptr;
            check(densum_simulate(
                cfg.get(), [](const char* row, void*) { std::cerr << row << "\n"; }, nullptr, &csv));
            write_output(sim_out, view(OwnedString(csv)));
        } else if (*ci) {
            const std::string text = read_file(ci_file);
            densum_string* out = nullptr;
            check(densum_analyze_ci(text.c_str(), ci_column.c_str(), method_from(ci_method), ci_range.c_str(),
                                    ci_alpha, ci_json ? DENSUM_FORMAT_JSON : DENSUM_FORMAT_TEXT, &out));
            write_output("", view(OwnedString(out)));
            if (!ci_out.empty()) {
                check(densum_analyze_ci(text.c_str(), ci_column.c_str(), method_from(ci_method), ci_range.c_str(),
                                        ci_alpha, DENSUM_FORMAT_JSON, &out));
                write_output(ci_out, view(OwnedString(out)));
            }
        } else if (*fit) {
            const std::string text = read_file(fit_file);
            const densum_fit_options o = fit_flags.options();
            densum_string* out = nullptr;
            check(densum_analyze_fit(text.c_str(), &o, fit_format == "json" ? DENSUM_FORMAT_JSON : DENSUM_FORMAT_TEXT,
                                     &out));
            write_output("", view(OwnedString(out)));
            if (!fit_json_out.empty()) {
                check(densum_analyze_fit(text.c_str(), &o, DENSUM_FORMAT_JSON, &out));
                write_output(fit_json_out, view(OwnedString(out)));
            }
        } else if (*diag) {
            if (diag_column.empty() && diag_fit.response.empty()) {
                std::cerr << "densum: diagnose needs --column or a fit (--response, --covariates)\n";
                return 1;
            }
            const std::string text = read_file(diag_file);
            const densum_fit_options o = diag_fit.options();
            const densum_format format = diag_format == "json"  ? DENSUM_FORMAT_JSON
                                         : diag_format == "csv" ? DENSUM_FORMAT_CSV
                                                                : DENSUM_FORMAT_TEXT;
            densum_string* out = nullptr;
            check(densum_analyze_diagnose(text.c_str(), diag_column.c_str(), &o, diag_coef.c_str(), diag_bins, format,
                                          &out));
            write_output("", view(OwnedString(out)));
            if (!diag_plot.empty()) {
                check(densum_analyze_diagnose(text.c_str(), diag_column.c_str(), &o, diag_coef.c_str(), diag_bins,
                                              DENSUM_FORMAT_CSV, &out));
                write_output(diag_plot, view(OwnedString(out)));
            }
        } else if (*prep) {
            densum_string* out = nullptr;
            check(densum_climate_prepare(read_file(prep_file).c_str(),
                                         prep_unit == "yearly" ? DENSUM_UNIT_YEARLY : DENSUM_UNIT_MONTHLY, &out));
            write_output(prep_out, view(OwnedString(out)));
        } else if (*fetch_cmd) {
            densum_string* temp = nullptr;
            densum_string* co2 = nullptr;
            check(densum_climate_normalize(fetch(temp_url).c_str(), DENSUM_SOURCE_GISTEMP, &temp));
            OwnedString temp_csv(temp);
            check(densum_climate_normalize(fetch(co2_url).c_str(), DENSUM_SOURCE_NOAA_CO2, &co2));
            OwnedString co2_csv(co2);
            densum_string* merged = nullptr;
            check(densum_climate_merge(densum_string_data(temp_csv.get()), densum_string_data(co2_csv.get()), nullptr,
                                       &merged));
            OwnedString merged_csv(merged);
            write_output(fetch_dir + "/temp.csv", view(temp_csv));
            write_output(fetch_dir + "/co2.csv", view(co2_csv));
            write_output(fetch_dir + "/climate.csv", view(merged_csv));
            std::cerr << "wrote temp.csv, co2.csv and climate.csv to " << fetch_dir << "\n";
        }
    } catch (const Exit& e) {
        return e.code;
    }
    return 0;
}
