#include "densum/analysis.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "densum/estimators.hpp"
#include "densum/numeric_kernels.hpp"

namespace densum {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

double require_double(std::string_view s, std::string_view what) {
    const auto v = parse_double(s);
    if (!v) throw std::invalid_argument(std::string(what) + ": '" + std::string(s) + "' is not a number");
    return *v;
}

std::uint64_t require_u64(std::string_view s, std::string_view what) {
    s = trim(s);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
        throw std::invalid_argument(std::string(what) + ": '" + std::string(s) + "' is not a nonnegative integer");
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string two_digit(int v) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%02d", v);
    return buf;
}

std::string year_month(int year, int month) { return std::to_string(year) + "-" + two_digit(month); }

std::pair<int, int> parse_year_month(std::string_view s, std::size_t line) {
    s = trim(s);
    const auto dash = s.find('-');
    if (dash == std::string_view::npos) throw ParseError(line, "line " + std::to_string(line) + ": date '" + std::string(s) + "' is not YYYY-MM");
    int year = 0, month = 0;
    const auto ys = s.substr(0, dash);
    auto ms = s.substr(dash + 1);
    if (const auto d2 = ms.find('-'); d2 != std::string_view::npos) ms = ms.substr(0, d2);  // tolerate YYYY-MM-DD
    const auto r1 = std::from_chars(ys.data(), ys.data() + ys.size(), year);
    const auto r2 = std::from_chars(ms.data(), ms.data() + ms.size(), month);
    if (r1.ec != std::errc() || r2.ec != std::errc() || r1.ptr != ys.data() + ys.size() ||
        r2.ptr != ms.data() + ms.size() || month < 1 || month > 12)
        throw ParseError(line, "line " + std::to_string(line) + ": date '" + std::string(s) + "' is not YYYY-MM");
    return {year, month};
}

int month_index(int year, int month) { return year * 12 + (month - 1); }

}  // namespace

// --------------------------------------------------------------------- CSV

std::optional<std::size_t> CsvTable::column_index(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return std::nullopt;
}

CsvTable parse_csv(std::string_view text) {
    CsvTable table;
    std::vector<std::string> record;
    std::string field;
    bool quoted_field = false;
    std::size_t line = 1, record_line = 1;
    std::size_t i = 0;
    bool have_header = false;

    auto finish_record = [&] {
        record.push_back(quoted_field ? field : std::string(trim(field)));
        field.clear();
        quoted_field = false;
        const bool blank = record.size() == 1 && record[0].empty();
        const bool comment = !record.empty() && !record[0].empty() && record[0][0] == '#';
        if (!blank && !comment) {
            if (!have_header) {
                table.header = std::move(record);
                have_header = true;
            } else {
                if (record.size() != table.header.size())
                    throw ParseError(record_line, "line " + std::to_string(record_line) + ": expected " +
                                                      std::to_string(table.header.size()) + " fields, found " +
                                                      std::to_string(record.size()));
                table.rows.push_back(std::move(record));
                table.line_numbers.push_back(record_line);
            }
        }
        record.clear();
    };

    while (i < text.size()) {
        const char c = text[i];
        if (c == '"' && trim(field).empty() && !quoted_field) {
            field.clear();
            quoted_field = true;
            ++i;
            for (;;) {
                if (i >= text.size()) throw ParseError(line, "line " + std::to_string(line) + ": unterminated quote");
                if (text[i] == '"') {
                    if (i + 1 < text.size() && text[i + 1] == '"') {
                        field.push_back('"');
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                if (text[i] == '\n') ++line;
                field.push_back(text[i++]);
            }
            while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r')) ++i;
            continue;
        }
        if (c == ',') {
            record.push_back(quoted_field ? field : std::string(trim(field)));
            field.clear();
            quoted_field = false;
            ++i;
            continue;
        }
        if (c == '\n') {
            finish_record();
            ++line;
            record_line = line;
            ++i;
            continue;
        }
        field.push_back(c);
        ++i;
    }
    if (!field.empty() || !record.empty() || quoted_field) finish_record();
    if (!have_header) throw ParseError(0, "CSV input has no header row");
    return table;
}

std::vector<double> numeric_column(const CsvTable& table, std::string_view name) {
    const auto idx = table.column_index(name);
    if (!idx) throw std::invalid_argument("missing column '" + std::string(name) + "'");
    std::vector<double> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto v = parse_double(table.rows[r][*idx]);
        if (!v) {
            const std::size_t line = table.line_numbers[r];
            throw ParseError(line, "line " + std::to_string(line) + ": column '" + std::string(name) +
                                       "' has non-numeric value '" + table.rows[r][*idx] + "'");
        }
        out.push_back(*v);
    }
    if (out.empty()) throw std::invalid_argument("column '" + std::string(name) + "' has no rows");
    return out;
}

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_number(double v) {
    if (!std::isfinite(v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// ------------------------------------------------------------------ config

const std::vector<std::pair<std::string, std::string>>* ConfigFile::section(std::string_view name) const {
    for (const auto& [n, kv] : sections)
        if (n == name) return &kv;
    return nullptr;
}

ConfigFile parse_config(std::string_view text) {
    ConfigFile cfg;
    cfg.sections.emplace_back("", std::vector<std::pair<std::string, std::string>>{});
    std::size_t line_no = 0;
    for (const auto raw : split(text, '\n')) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw ParseError(line_no, "line " + std::to_string(line_no) + ": malformed section header");
            cfg.sections.emplace_back(lower(trim(line.substr(1, line.size() - 2))),
                                      std::vector<std::pair<std::string, std::string>>{});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(line_no, "line " + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError(line_no, "line " + std::to_string(line_no) + ": empty key");
        cfg.sections.back().second.emplace_back(lower(key), std::string(trim(line.substr(eq + 1))));
    }
    return cfg;
}

void apply_config_value(ExperimentConfig& c, std::string_view key, std::string_view value) {
    auto list = [&](std::string_view what) {
        std::vector<double> out;
        for (const auto item : split(value, ',')) out.push_back(require_double(item, what));
        return out;
    };
    if (key == "table") {
        c.table = static_cast<int>(require_u64(value, key));
    } else if (key == "n") {
        c.n_values.clear();
        for (const auto item : split(value, ',')) c.n_values.push_back(require_u64(item, key));
    } else if (key == "phi" || key == "phi_star" || key == "phi-star") {
        c.phi_values = list(key);
    } else if (key == "alpha_shape" || key == "alpha_shapes") {
        c.alpha_shapes = list(key);
    } else if (key == "beta_shape") {
        c.beta_shape = require_double(value, key);
    } else if (key == "reps") {
        c.reps = require_u64(value, key);
    } else if (key == "alpha") {
        c.alpha = require_double(value, key);
    } else if (key == "c_star") {
        c.c_star = require_double(value, key);
    } else if (key == "seed") {
        c.seed = require_u64(value, key);
    } else if (key == "cluster_size") {
        c.cluster_size = require_u64(value, key);
    } else if (key == "threads") {
        c.threads = static_cast<unsigned>(require_u64(value, key));
    } else {
        throw std::invalid_argument("unknown configuration key '" + std::string(key) + "'");
    }
}

ExperimentConfig experiment_config_from(const ConfigFile& file, int table, ExperimentConfig base) {
    base.table = table;
    static const std::set<std::string, std::less<>> shared{"alpha", "seed", "reps", "threads"};
    if (const auto* analysis = file.section("analysis")) {
        for (const auto& [k, v] : *analysis)
            if (shared.count(k)) apply_config_value(base, k, v);
    }
    if (const auto* sec = file.section("table" + std::to_string(table))) {
        for (const auto& [k, v] : *sec) apply_config_value(base, k, v);
    }
    base.table = table;
    base.validate();
    return base;
}

// ---------------------------------------------------------- simulation CSV

std::string coverage_csv_header() {
    return "table,n,phi,alpha_shape,coefficient,threshold,mean_lower,mean_upper,ci_wald,ci_u,ci_r,a_hat,av_star,"
           "verdict,seed,repair_lambda";
}

std::string coverage_csv_row(const CoverageReport& r) {
    std::string out;
    out += std::to_string(r.table) + ",";
    out += std::to_string(r.n) + ",";
    out += format_number(r.phi) + ",";
    out += (r.table == 3 ? std::string("NA") : format_number(r.alpha_shape)) + ",";
    out += (r.coefficient < 0 ? std::string("mean") : "beta" + std::to_string(r.coefficient)) + ",";
    out += format_number(r.threshold) + ",";
    out += format_number(r.mean_lower) + ",";
    out += format_number(r.mean_upper) + ",";
    out += format_number(r.ci_wald) + ",";
    out += format_number(r.ci_u) + ",";
    out += (r.ci_r < 0.0 ? std::string("NA") : format_number(r.ci_r)) + ",";
    out += format_number(r.a5.a_hat) + ",";
    out += format_number(r.a5.av_star) + ",";
    out += std::string(to_string(r.a5.verdict)) + ",";
    out += std::to_string(r.seed) + ",";
    out += format_number(r.repair_lambda);
    return out;
}

std::string coverage_csv(const std::vector<CoverageReport>& rows) {
    std::string out(kSimulateCsvStamp);
    out += "\n" + coverage_csv_header() + "\n";
    for (const auto& r : rows) out += coverage_csv_row(r) + "\n";
    return out;
}

// ----------------------------------------------------------------- reports

RangeOption parse_range_option(std::string_view text) {
    text = trim(text);
    const auto eq = text.find('=');
    const std::string name = lower(trim(text.substr(0, eq)));
    RangeOption r;
    r.source = range_source_from_string(name);
    if (r.source == RangeSource::known || r.source == RangeSource::marginal_range) {
        if (eq == std::string_view::npos)
            throw std::invalid_argument("range '" + name + "' needs a value, e.g. " + name + "=1");
        r.value = require_double(text.substr(eq + 1), "range");
        if (!(r.value > 0.0)) throw std::invalid_argument("range value must be positive");
    } else if (eq != std::string_view::npos) {
        throw std::invalid_argument("range '" + name + "' takes no value");
    }
    return r;
}

std::string to_string(const RangeOption& r) {
    switch (r.source) {
        case RangeSource::known: return "known=" + format_number(r.value);
        case RangeSource::marginal_range: return "marginal=" + format_number(r.value);
        case RangeSource::two_mean: return "two-mean";
        case RangeSource::residual_range: return "residual";
    }
    return "residual";
}

void to_json(json& j, const UDiagnosticsReport& u) {
    j = json{{"expected_value", u.expected_value}, {"functional_average", u.functional_average},
             {"midpoint", u.midpoint},             {"is_regular", u.is_regular},
             {"is_u", u.is_u},                     {"is_sub_u", u.is_sub_u},
             {"cdf_area_gap", u.cdf_area_gap},     {"tolerance", u.tolerance},
             {"support_estimated", u.support_estimated}};
}

void from_json(const json& j, UDiagnosticsReport& u) {
    j.at("expected_value").get_to(u.expected_value);
    j.at("functional_average").get_to(u.functional_average);
    j.at("midpoint").get_to(u.midpoint);
    j.at("is_regular").get_to(u.is_regular);
    j.at("is_u").get_to(u.is_u);
    j.at("is_sub_u").get_to(u.is_sub_u);
    j.at("cdf_area_gap").get_to(u.cdf_area_gap);
    j.at("tolerance").get_to(u.tolerance);
    j.at("support_estimated").get_to(u.support_estimated);
}

void to_json(json& j, const CoefficientRow& c) {
    j = json{{"name", c.name},     {"estimate", c.estimate},         {"lower", c.lower},
             {"upper", c.upper},   {"method", c.method},             {"range_source", c.range_source},
             {"range_value", c.range_value}};
}

void from_json(const json& j, CoefficientRow& c) {
    j.at("name").get_to(c.name);
    j.at("estimate").get_to(c.estimate);
    j.at("lower").get_to(c.lower);
    j.at("upper").get_to(c.upper);
    j.at("method").get_to(c.method);
    j.at("range_source").get_to(c.range_source);
    j.at("range_value").get_to(c.range_value);
}

void to_json(json& j, const SeriesDiagnostics& d) {
    j = json{{"series", d.series},           {"u_class", d.u},
             {"rule_of_thumb", d.rule_of_thumb}, {"lag_short", d.lag_short},
             {"lag_long", d.lag_long},       {"phi_hat_short", d.phi_hat_short},
             {"phi_hat_long", d.phi_hat_long}, {"notes", d.notes}};
}

void from_json(const json& j, SeriesDiagnostics& d) {
    j.at("series").get_to(d.series);
    j.at("u_class").get_to(d.u);
    j.at("rule_of_thumb").get_to(d.rule_of_thumb);
    j.at("lag_short").get_to(d.lag_short);
    j.at("lag_long").get_to(d.lag_long);
    j.at("phi_hat_short").get_to(d.phi_hat_short);
    j.at("phi_hat_long").get_to(d.phi_hat_long);
    j.at("notes").get_to(d.notes);
}

void to_json(json& j, const PartitionReport& p) {
    j = json{{"coefficient", p.coefficient}, {"partitions", p.partitions}, {"values", p.values},
             {"recommended", p.recommended}, {"ties", p.ties}};
}

void from_json(const json& j, PartitionReport& p) {
    j.at("coefficient").get_to(p.coefficient);
    j.at("partitions").get_to(p.partitions);
    j.at("values").get_to(p.values);
    j.at("recommended").get_to(p.recommended);
    j.at("ties").get_to(p.ties);
}

void to_json(json& j, const RetentionRow& r) {
    j = json{{"dropped", r.dropped},
             {"estimate_with", r.estimate_with},
             {"estimate_without", r.estimate_without},
             {"relative_change", r.relative_change},
             {"meets_threshold", r.meets_threshold}};
}

void from_json(const json& j, RetentionRow& r) {
    j.at("dropped").get_to(r.dropped);
    j.at("estimate_with").get_to(r.estimate_with);
    j.at("estimate_without").get_to(r.estimate_without);
    j.at("relative_change").get_to(r.relative_change);
    j.at("meets_threshold").get_to(r.meets_threshold);
}

void to_json(json& j, const Provenance& p) {
    j = json{{"input_hash", p.input_hash}, {"seed", p.seed}, {"config", p.config}, {"tool_version", p.tool_version}};
}

void from_json(const json& j, Provenance& p) {
    j.at("input_hash").get_to(p.input_hash);
    j.at("seed").get_to(p.seed);
    j.at("config").get_to(p.config);
    j.at("tool_version").get_to(p.tool_version);
}

std::string report_to_json(const AnalysisReport& r, int indent) {
    json j{{"model", r.model},
           {"n", r.n},
           {"alpha", r.alpha},
           {"coefficients", r.coefficients},
           {"diagnostics", r.diagnostics},
           {"partitions", r.partitions},
           {"retention", r.retention},
           {"warnings", r.warnings},
           {"provenance", r.provenance}};
    return j.dump(indent);
}

AnalysisReport report_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(0, std::string("report JSON: ") + e.what());
    }
    AnalysisReport r;
    try {
        j.at("model").get_to(r.model);
        j.at("n").get_to(r.n);
        j.at("alpha").get_to(r.alpha);
        j.at("coefficients").get_to(r.coefficients);
        j.at("diagnostics").get_to(r.diagnostics);
        j.at("partitions").get_to(r.partitions);
        j.at("retention").get_to(r.retention);
        j.at("warnings").get_to(r.warnings);
        j.at("provenance").get_to(r.provenance);
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("report JSON: ") + e.what());
    }
    return r;
}

std::string report_to_text(const AnalysisReport& r) {
    std::ostringstream os;
    os << "model: " << r.model << "  (n = " << r.n << ", level >= " << format_number(1.0 - r.alpha) << ")\n\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-18s %12s %12s %12s  %-10s %s\n", "coefficient", "estimate", "lower", "upper",
                  "method", "range");
    os << buf;
    for (const auto& c : r.coefficients) {
        std::snprintf(buf, sizeof buf, "%-18s %12s %12s %12s  %-10s %s=%s\n", c.name.c_str(),
                      format_number(c.estimate).c_str(), format_number(c.lower).c_str(),
                      format_number(c.upper).c_str(), c.method.c_str(), c.range_source.c_str(),
                      format_number(c.range_value).c_str());
        os << buf;
    }
    os << "\ndiagnostics\n";
    for (const auto& d : r.diagnostics) {
        os << "  " << d.series << ": U " << (d.u.is_u ? "yes" : "no") << " (mean " << format_number(d.u.expected_value)
           << ", midpoint " << format_number(d.u.midpoint) << "), phi bound " << format_number(d.rule_of_thumb)
           << ", phi_hat[L=" << d.lag_short << "] " << format_number(d.phi_hat_short) << ", phi_hat[L=" << d.lag_long
           << "] " << format_number(d.phi_hat_long) << "\n";
        for (const auto& note : d.notes) os << "    note: " << note << "\n";
    }
    for (const auto& p : r.partitions) {
        os << "\npartition comparison (" << p.coefficient << ")\n";
        for (std::size_t i = 0; i < p.partitions.size(); ++i)
            os << "  " << (i == p.recommended ? "* " : "  ") << p.partitions[i] << ": " << format_number(p.values[i])
               << "\n";
        for (const auto& [a, b] : p.ties) os << "  tie: " << p.partitions[a] << " = " << p.partitions[b] << "\n";
    }
    if (!r.retention.empty()) {
        os << "\nretention screen (10% change)\n";
        for (const auto& t : r.retention)
            os << "  drop " << t.dropped << ": " << format_number(t.estimate_with) << " -> "
               << format_number(t.estimate_without) << " (" << format_number(100.0 * t.relative_change) << "%) "
               << (t.meets_threshold ? "retain" : "drop") << "\n";
    }
    for (const auto& w : r.warnings) os << "warning: " << w << "\n";
    os << "\ninput " << r.provenance.input_hash << ", densum " << r.provenance.tool_version << "\n";
    return os.str();
}

// ---------------------------------------------------------------- commands

CiReport run_ci(std::string_view csv_text, const CiOptions& options) {
    const CsvTable table = parse_csv(csv_text);
    const std::vector<double> values = numeric_column(table, options.column);
    const SampleSummary summary = summarize(values);
    CiReport rep;
    rep.n = summary.n;
    rep.mean = summary.mean;
    rep.provenance.input_hash = fnv1a_hex(csv_text);
    rep.provenance.config = "column=" + options.column + " method=" + std::string(to_string(options.method)) +
                            " range=" + to_string(options.range) + " alpha=" + format_number(options.alpha);
    double r = 0.0;
    switch (options.range.source) {
        case RangeSource::known:
        case RangeSource::marginal_range: r = options.range.value; break;
        case RangeSource::residual_range: r = summary.range; break;
        case RangeSource::two_mean:
            if (summary.mean < 0.0) throw std::domain_error("two-mean range needs a nonnegative mean");
            r = 2.0 * summary.mean;
            break;
    }
    rep.range_value = r;
    if (summary.range == 0.0) rep.warnings.push_back("constant column: interval is degenerate");
    rep.set = ci_mean(summary, r, options.alpha, options.method, summary.min >= 0.0);
    rep.set.range_source = options.range.source;
    return rep;
}

std::string ci_to_json(const CiReport& r, int indent) {
    json j{{"lower", r.set.lower},
           {"upper", r.set.upper},
           {"level", r.set.level},
           {"method", std::string(to_string(r.set.method))},
           {"range_source", std::string(to_string(r.set.range_source))},
           {"range_value", r.range_value},
           {"n", r.n},
           {"mean", r.mean},
           {"warnings", r.warnings},
           {"provenance", r.provenance}};
    return j.dump(indent);
}

std::string ci_to_text(const CiReport& r) {
    std::ostringstream os;
    os << "mean " << format_number(r.mean) << " (n = " << r.n << ")\n"
       << ">= " << format_number(r.set.level) << " interval [" << format_number(r.set.lower) << ", "
       << format_number(r.set.upper) << "]  method " << to_string(r.set.method) << ", range "
       << to_string(r.set.range_source) << " = " << format_number(r.range_value) << "\n";
    for (const auto& w : r.warnings) os << "warning: " << w << "\n";
    return os.str();
}

namespace {

struct Design {
    Matrix x;
    std::vector<std::string> names;
    std::vector<double> y;
};

Design build_design(const CsvTable& table, const FitOptions& o, const std::vector<std::string>& covariates) {
    if (o.response.empty()) throw std::invalid_argument("fit needs a response column");
    Design d;
    d.y = numeric_column(table, o.response);
    const auto n = static_cast<Eigen::Index>(d.y.size());
    const auto p = static_cast<Eigen::Index>(covariates.size() + (o.intercept ? 1 : 0));
    if (p == 0) throw std::invalid_argument("fit needs at least one covariate or an intercept");
    d.x.resize(n, p);
    Eigen::Index col = 0;
    if (o.intercept) {
        d.x.col(col++).setOnes();
        d.names.emplace_back("(intercept)");
    }
    for (const auto& c : covariates) {
        const std::vector<double> v = numeric_column(table, c);
        d.x.col(col++) = Eigen::Map<const Vector>(v.data(), n);
        d.names.push_back(c);
    }
    return d;
}

Partition partition_from_spec(const CsvTable& table, std::string_view spec, std::size_t n) {
    if (spec.rfind("seq:", 0) == 0) return sequential_partition(n, require_u64(spec.substr(4), "seq partition"));
    const auto idx = table.column_index(spec);
    if (!idx) throw std::invalid_argument("missing partition column '" + std::string(spec) + "'");
    std::map<std::string, std::size_t> ids;
    std::vector<std::size_t> assignment;
    assignment.reserve(n);
    for (const auto& row : table.rows) {
        const auto [it, inserted] = ids.emplace(row[*idx], ids.size());
        assignment.push_back(it->second);
    }
    return Partition(std::move(assignment));
}

SeriesDiagnostics diagnose_series(std::string name, std::span<const double> z) {
    SeriesDiagnostics d;
    d.series = std::move(name);
    d.u = check_u_class(Sample(std::vector<double>(z.begin(), z.end())));
    const std::size_t n = z.size();
    const SampleSummary s = summarize(z);
    if (s.variance > 0.0) {
        d.rule_of_thumb = (s.range * s.range / (12.0 * s.variance) - 1.0) / static_cast<double>(n - 1);
        const auto [ls, ll] = acf_lag_windows(n);
        d.lag_short = ls;
        d.lag_long = ll;
        const AcfResult a = acf_phi_hat(z, ls);
        const AcfResult b = acf_phi_hat(z, ll);
        d.phi_hat_short = a.phi_hat;
        d.phi_hat_long = b.phi_hat;
        if (a.r.front() < -0.9) d.notes.emplace_back("lag-1 autocorrelation near -1 (alternating series)");
        if (d.phi_hat_short > d.rule_of_thumb || d.phi_hat_long > d.rule_of_thumb)
            d.notes.emplace_back("phi_hat exceeds the rule-of-thumb bound");
    } else {
        d.notes.emplace_back("zero spread: rule of thumb and autocorrelations undefined");
    }
    if (!d.u.is_u) d.notes.emplace_back("mean differs from the support midpoint beyond tolerance");
    return d;
}

struct FitCore {
    Design design;
    RegressionFit fit;
};

FitCore fit_core(const CsvTable& table, const FitOptions& o, const std::vector<std::string>& covariates) {
    FitCore fc{build_design(table, o, covariates), {}};
    fc.fit = ols_fit(fc.design.x, fc.design.y, fc.design.names);
    // Float noise from an exact fit would otherwise give a spurious nonzero range.
    const double floor = 64.0 * std::numeric_limits<double>::epsilon() * fc.fit.y.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < fc.fit.residuals.size(); ++i)
        if (std::fabs(fc.fit.residuals(i)) <= floor) fc.fit.residuals(i) = 0.0;
    return fc;
}

}  // namespace

AnalysisReport run_fit(std::string_view csv_text, const FitOptions& o) {
    if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    const CsvTable table = parse_csv(csv_text);
    const FitCore fc = fit_core(table, o, o.covariates);
    const RegressionFit& fit = fc.fit;
    const std::size_t n = fit.n(), p = fit.p();

    AnalysisReport rep;
    rep.n = n;
    rep.alpha = o.alpha;
    rep.model = o.response + " ~ ";
    for (std::size_t k = 0; k < fc.design.names.size(); ++k)
        rep.model += (k ? " + " : "") + fc.design.names[k];
    rep.provenance.input_hash = fnv1a_hex(csv_text);
    rep.provenance.seed = o.seed;
    rep.provenance.config = "range=" + to_string(o.range) + " alpha=" + format_number(o.alpha);

    for (std::size_t s = 0; s < p; ++s) {
        const Vector ws = fit.weight_rows.row(static_cast<Eigen::Index>(s)).transpose();
        const std::span<const double> wspan(ws.data(), n);
        const double b = fit.coefficients(static_cast<Eigen::Index>(s));
        CoefficientRow row;
        row.name = fc.design.names[s];
        row.estimate = b;
        ConfidenceSet cs;
        switch (o.range.source) {
            case RangeSource::residual_range: {
                const ResidualRange rr = residual_range(fit, s);
                if (rr.degenerate) rep.warnings.push_back(row.name + ": " + rr.warning);
                row.range_value = rr.value;
                cs = ci_linear(b, wspan, WeightedResidualRange{rr.value}, o.alpha);
                break;
            }
            case RangeSource::known:
                row.range_value = o.range.value;
                cs = ci_linear(b, wspan, KnownRanges{{o.range.value}}, o.alpha);
                break;
            case RangeSource::marginal_range:
                row.range_value = o.range.value;
                cs = ci_linear(b, wspan, MarginalRange{o.range.value}, o.alpha);
                break;
            case RangeSource::two_mean: {
                std::vector<double> means(fit.fitted.data(), fit.fitted.data() + n);
                row.range_value = 2.0 * fit.fitted.maxCoeff();
                cs = ci_linear(b, wspan, TwoMeanRange{std::move(means)}, o.alpha);
                break;
            }
        }
        row.lower = cs.lower;
        row.upper = cs.upper;
        row.method = std::string(to_string(cs.method));
        row.range_source = std::string(to_string(cs.range_source));
        rep.coefficients.push_back(std::move(row));

        const Vector z = fit.weighted_residuals(s);
        rep.diagnostics.push_back(
            diagnose_series("weighted_residuals:" + fc.design.names[s], std::span<const double>(z.data(), n)));
    }
    rep.diagnostics.push_back(diagnose_series("residuals", std::span<const double>(fit.residuals.data(), n)));

    if (!o.partitions.empty()) {
        std::vector<Partition> parts;
        for (const auto& spec : o.partitions) parts.push_back(partition_from_spec(table, spec, n));
        for (std::size_t s = 0; s < p; ++s) {
            PartitionReport pr;
            pr.coefficient = fc.design.names[s];
            pr.partitions = o.partitions;
            if (parts.size() == 1) {
                pr.values.push_back(cluster_robust(fit, parts[0], s).value);
            } else {
                const PartitionComparison cmp = partition_compare(fit, parts, s);
                pr.values = cmp.values;
                pr.recommended = cmp.recommended;
                pr.ties = cmp.ties;
            }
            rep.partitions.push_back(std::move(pr));
        }
    }

    if (!o.focus.empty()) {
        const auto it = std::find(o.covariates.begin(), o.covariates.end(), o.focus);
        if (it == o.covariates.end()) throw std::invalid_argument("focus '" + o.focus + "' is not a covariate");
        const std::size_t focus_col = static_cast<std::size_t>(it - o.covariates.begin()) + (o.intercept ? 1 : 0);
        const double with = fit.coefficients(static_cast<Eigen::Index>(focus_col));
        for (const auto& c : o.covariates) {
            if (c == o.focus) continue;
            std::vector<std::string> reduced;
            for (const auto& d : o.covariates)
                if (d != c) reduced.push_back(d);
            const FitCore alt = fit_core(table, o, reduced);
            const auto pos = std::find(alt.design.names.begin(), alt.design.names.end(), o.focus);
            const double without = alt.fit.coefficients(pos - alt.design.names.begin());
            RetentionRow rr;
            rr.dropped = c;
            rr.estimate_with = with;
            rr.estimate_without = without;
            rr.relative_change = without != 0.0 ? (with - without) / std::fabs(without) : 0.0;
            rr.meets_threshold = std::fabs(rr.relative_change) >= 0.10;
            rep.retention.push_back(rr);
        }
    }
    return rep;
}

DiagnoseReport run_diagnose(std::string_view csv_text, const DiagnoseOptions& o) {
    const CsvTable table = parse_csv(csv_text);
    std::vector<double> series;
    DiagnoseReport rep;
    if (!o.column.empty()) {
        series = numeric_column(table, o.column);
        rep.series = o.column;
    } else {
        const FitCore fc = fit_core(table, o.fit, o.fit.covariates);
        if (o.coefficient.empty() || o.coefficient == "residuals") {
            series.assign(fc.fit.residuals.data(), fc.fit.residuals.data() + fc.fit.residuals.size());
            rep.series = "residuals";
        } else {
            const auto it = std::find(fc.design.names.begin(), fc.design.names.end(), o.coefficient);
            if (it == fc.design.names.end())
                throw std::invalid_argument("unknown coefficient '" + o.coefficient + "'");
            const Vector z = fc.fit.weighted_residuals(static_cast<std::size_t>(it - fc.design.names.begin()));
            series.assign(z.data(), z.data() + z.size());
            rep.series = "weighted_residuals:" + o.coefficient;
        }
    }
    const SampleSummary s = summarize(series);
    if (!(s.variance > 0.0)) throw std::domain_error("constant series: diagnostics undefined");
    rep.n = s.n;
    rep.diagnostics = diagnose_series(rep.series, series);
    rep.acf_short = acf_phi_hat(series, rep.diagnostics.lag_short).r;
    rep.acf_long = acf_phi_hat(series, rep.diagnostics.lag_long).r;

    const std::size_t bins =
        o.histogram_bins ? o.histogram_bins
                         : static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(s.n)))) + 1;
    rep.histogram_counts.assign(bins, 0);
    for (std::size_t b = 0; b <= bins; ++b)
        rep.histogram_edges.push_back(s.min + s.range * static_cast<double>(b) / static_cast<double>(bins));
    for (const double v : series) {
        auto b = static_cast<std::size_t>((v - s.min) / s.range * static_cast<double>(bins));
        ++rep.histogram_counts[std::min(b, bins - 1)];
    }
    std::vector<double> sorted = series;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
        rep.ecdf.emplace_back(sorted[i], static_cast<double>(i + 1) / static_cast<double>(sorted.size()));
    }
    rep.provenance.input_hash = fnv1a_hex(csv_text);
    return rep;
}

std::string diagnose_to_json(const DiagnoseReport& r, int indent) {
    json ecdf = json::array();
    for (const auto& [x, f] : r.ecdf) ecdf.push_back({x, f});
    json j{{"series", r.series},
           {"n", r.n},
           {"diagnostics", r.diagnostics},
           {"acf_short", r.acf_short},
           {"acf_long", r.acf_long},
           {"histogram_edges", r.histogram_edges},
           {"histogram_counts", r.histogram_counts},
           {"ecdf", ecdf},
           {"provenance", r.provenance}};
    return j.dump(indent);
}

std::string diagnose_plot_csv(const DiagnoseReport& r) {
    std::string out = "# densum-diagnose-csv v1\nseries,x,y\n";
    for (std::size_t b = 0; b < r.histogram_counts.size(); ++b)
        out += "histogram," + format_number(0.5 * (r.histogram_edges[b] + r.histogram_edges[b + 1])) + "," +
               std::to_string(r.histogram_counts[b]) + "\n";
    for (const auto& [x, f] : r.ecdf) out += "ecdf," + format_number(x) + "," + format_number(f) + "\n";
    for (std::size_t l = 0; l < r.acf_short.size(); ++l)
        out += "acf_short," + std::to_string(l + 1) + "," + format_number(r.acf_short[l]) + "\n";
    for (std::size_t l = 0; l < r.acf_long.size(); ++l)
        out += "acf_long," + std::to_string(l + 1) + "," + format_number(r.acf_long[l]) + "\n";
    return out;
}

std::string diagnose_to_text(const DiagnoseReport& r) {
    const SeriesDiagnostics& d = r.diagnostics;
    std::ostringstream os;
    os << "series " << r.series << " (n = " << r.n << ")\n"
       << "  U class: " << (d.u.is_u ? "yes" : "no") << "  mean " << format_number(d.u.expected_value) << ", midpoint "
       << format_number(d.u.midpoint) << ", tolerance " << format_number(d.u.tolerance) << ", cdf area gap "
       << format_number(d.u.cdf_area_gap) << "\n"
       << "  rule-of-thumb bound on phi: " << format_number(d.rule_of_thumb) << "\n"
       << "  phi_hat (L = " << d.lag_short << "): " << format_number(d.phi_hat_short) << "\n"
       << "  phi_hat (L = " << d.lag_long << "): " << format_number(d.phi_hat_long) << "\n";
    for (const auto& note : d.notes) os << "  note: " << note << "\n";
    return os.str();
}

// ----------------------------------------------------------------- climate

std::vector<ClimateRow> parse_climate_csv(std::string_view text) {
    const CsvTable t = parse_csv(text);
    const auto date = t.column_index("date");
    const auto temp = t.column_index("temp");
    const auto co2 = t.column_index("co2");
    const auto index = t.column_index("index");
    if (!date || !temp || !co2) throw std::invalid_argument("climate CSV needs columns date, temp, co2");
    std::vector<ClimateRow> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::size_t line = t.line_numbers[r];
        ClimateRow row;
        std::tie(row.year, row.month) = parse_year_month(t.rows[r][*date], line);
        auto num = [&](std::size_t col, const char* what) {
            const auto v = parse_double(t.rows[r][col]);
            if (!v) throw ParseError(line, "line " + std::to_string(line) + ": " + what + " is not numeric");
            return *v;
        };
        row.temp = num(*temp, "temp");
        row.co2 = num(*co2, "co2");
        if (index) row.index = num(*index, "index");
        if (!rows.empty()) {
            const int prev = month_index(rows.back().year, rows.back().month);
            const int cur = month_index(row.year, row.month);
            if (cur <= prev)
                throw ParseError(line, "line " + std::to_string(line) + ": dates must be strictly increasing");
            if (cur != prev + 1)
                throw ParseError(line, "line " + std::to_string(line) + ": gap in dates before " +
                                           year_month(row.year, row.month));
        }
        rows.push_back(row);
    }
    return rows;
}

std::string climate_csv(const std::vector<ClimateRow>& rows) {
    const bool has_index = !rows.empty() && rows.front().index.has_value();
    std::string out = has_index ? "date,temp,co2,index\n" : "date,temp,co2\n";
    char buf[96];
    for (const auto& r : rows) {
        out += year_month(r.year, r.month) + ",";
        std::snprintf(buf, sizeof buf, "%.10g,%.10g", r.temp, r.co2);
        out += buf;
        if (has_index) {
            std::snprintf(buf, sizeof buf, ",%.10g", r.index.value_or(NAN));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

namespace {

void check_contiguous(const std::vector<ClimateRow>& rows) {
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (month_index(rows[i].year, rows[i].month) != month_index(rows[i - 1].year, rows[i - 1].month) + 1)
            throw std::invalid_argument("gap in dates at " + year_month(rows[i].year, rows[i].month));
    }
}

// 0 winter (reference), 1 spring, 2 summer, 3 fall.
int season_of(int month) {
    if (month == 12 || month <= 2) return 0;
    if (month <= 5) return 1;
    if (month <= 8) return 2;
    return 3;
}

}  // namespace

ModelFrame climate_prepare(const std::vector<ClimateRow>& rows, ClimateUnit unit) {
    if (rows.size() < 2) throw std::invalid_argument("climate data needs at least two rows");
    check_contiguous(rows);
    const bool has_index = std::all_of(rows.begin(), rows.end(), [](const ClimateRow& r) { return r.index.has_value(); });
    for (const auto& r : rows) {
        if (!(r.co2 > 0.0)) throw std::domain_error("co2 must be positive for the log transform at " + year_month(r.year, r.month));
        if (has_index && !(*r.index > 0.0))
            throw std::domain_error("index must be positive for the log transform at " + year_month(r.year, r.month));
    }
    ModelFrame f;
    if (unit == ClimateUnit::monthly) {
        f.columns = {"temp", "temp_lag1", "log_co2_lag1"};
        if (has_index) f.columns.emplace_back("log_index_lag1");
        f.columns.insert(f.columns.end(), {"spring", "summer", "fall"});
        const auto n = static_cast<Eigen::Index>(rows.size() - 1);
        f.data.resize(n, static_cast<Eigen::Index>(f.columns.size()));
        for (Eigen::Index t = 0; t < n; ++t) {
            const ClimateRow& cur = rows[static_cast<std::size_t>(t) + 1];
            const ClimateRow& prev = rows[static_cast<std::size_t>(t)];
            Eigen::Index c = 0;
            f.data(t, c++) = cur.temp;
            f.data(t, c++) = prev.temp;
            f.data(t, c++) = std::log(prev.co2);
            if (has_index) f.data(t, c++) = std::log(*prev.index);
            const int season = season_of(cur.month);
            for (int s = 1; s <= 3; ++s) f.data(t, c++) = season == s ? 1.0 : 0.0;
            f.labels.push_back(year_month(cur.year, cur.month));
        }
        return f;
    }

    struct YearAgg {
        int year;
        int months = 0;
        double temp = 0.0, log_co2 = 0.0, log_index = 0.0;
    };
    std::vector<YearAgg> years;
    for (const auto& r : rows) {
        if (years.empty() || years.back().year != r.year) years.push_back(YearAgg{r.year});
        YearAgg& y = years.back();
        ++y.months;
        y.temp += r.temp;
        y.log_co2 += std::log(r.co2);
        if (has_index) y.log_index += std::log(*r.index);
    }
    std::erase_if(years, [](const YearAgg& y) { return y.months != 12; });
    if (years.size() < 2) throw std::invalid_argument("yearly frame needs at least two complete years");
    f.columns = {"temp", "log_co2_lag1"};
    if (has_index) f.columns.emplace_back("log_index_lag1");
    const auto n = static_cast<Eigen::Index>(years.size() - 1);
    f.data.resize(n, static_cast<Eigen::Index>(f.columns.size()));
    for (Eigen::Index t = 0; t < n; ++t) {
        const YearAgg& cur = years[static_cast<std::size_t>(t) + 1];
        const YearAgg& prev = years[static_cast<std::size_t>(t)];
        f.data(t, 0) = cur.temp / 12.0;
        f.data(t, 1) = prev.log_co2 / 12.0;
        if (has_index) f.data(t, 2) = prev.log_index / 12.0;
        f.labels.push_back(std::to_string(cur.year));
    }
    return f;
}

std::string model_frame_csv(const ModelFrame& f) {
    std::string out = "date";
    for (const auto& c : f.columns) out += "," + c;
    out += "\n";
    char buf[40];
    for (Eigen::Index r = 0; r < f.data.rows(); ++r) {
        out += f.labels[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < f.data.cols(); ++c) {
            std::snprintf(buf, sizeof buf, ",%.12g", f.data(r, c));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

std::vector<MonthlyValue> normalize_gistemp(std::string_view text) {
    std::vector<MonthlyValue> out;
    bool in_table = false;
    std::size_t line_no = 0;
    for (const auto raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (!in_table) {
            if (fields.size() >= 13 && lower(fields[0]) == "year" && lower(fields[1]) == "jan") in_table = true;
            continue;
        }
        if (lower(fields[0]) == "year") continue;  // repeated header blocks
        if (fields.size() < 13)
            throw ParseError(line_no, "line " + std::to_string(line_no) + ": expected Year and 12 monthly values");
        int year = 0;
        const auto r = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), year);
        if (r.ec != std::errc() || r.ptr != fields[0].data() + fields[0].size())
            throw ParseError(line_no, "line " + std::to_string(line_no) + ": year '" + std::string(fields[0]) +
                                          "' is not an integer");
        for (int m = 1; m <= 12; ++m) {
            const auto cell = fields[static_cast<std::size_t>(m)];
            if (cell.find('*') != std::string_view::npos) continue;
            const auto v = parse_double(cell);
            if (!v)
                throw ParseError(line_no, "line " + std::to_string(line_no) + ": month " + std::to_string(m) +
                                              " value '" + std::string(cell) + "' is not numeric");
            out.push_back({year, m, *v});
        }
    }
    if (!in_table) throw ParseError(0, "no 'Year,Jan,...,Dec' header found in temperature input");
    return out;
}

std::vector<MonthlyValue> normalize_co2(std::string_view text) {
    std::vector<MonthlyValue> out;
    std::optional<std::size_t> iy, im, iv;
    std::size_t line_no = 0;
    for (const auto raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto fields = split(line, ',');
        if (!iy) {
            for (std::size_t i = 0; i < fields.size(); ++i) {
                const std::string f = lower(fields[i]);
                if (f == "year") iy = i;
                else if (f == "month") im = i;
                else if (f == "average" || f == "monthly_average") iv = i;
            }
            if (!iy || !im || !iv)
                throw ParseError(line_no, "line " + std::to_string(line_no) +
                                              ": expected a header with year, month and average columns");
            continue;
        }
        const std::size_t need = std::max({*iy, *im, *iv}) + 1;
        if (fields.size() < need)
            throw ParseError(line_no, "line " + std::to_string(line_no) + ": too few fields");
        const auto y = parse_double(fields[*iy]);
        const auto m = parse_double(fields[*im]);
        const auto v = parse_double(fields[*iv]);
        if (!y || !m || !v || *m < 1 || *m > 12)
            throw ParseError(line_no, "line " + std::to_string(line_no) + ": malformed CO2 record");
        if (*v < 0.0) continue;  // upstream missing-value marker
        out.push_back({static_cast<int>(*y), static_cast<int>(*m), *v});
    }
    if (!iy) throw ParseError(0, "no header found in CO2 input");
    return out;
}

std::vector<MonthlyValue> parse_monthly_csv(std::string_view text) {
    const CsvTable t = parse_csv(text);
    const auto date = t.column_index("date");
    const auto value = t.column_index("value");
    if (!date || !value) throw std::invalid_argument("monthly CSV needs columns date, value");
    std::vector<MonthlyValue> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::size_t line = t.line_numbers[r];
        MonthlyValue mv;
        std::tie(mv.year, mv.month) = parse_year_month(t.rows[r][*date], line);
        const auto v = parse_double(t.rows[r][*value]);
        if (!v) throw ParseError(line, "line " + std::to_string(line) + ": value is not numeric");
        mv.value = *v;
        out.push_back(mv);
    }
    return out;
}

std::string monthly_csv(const std::vector<MonthlyValue>& values) {
    std::string out = "date,value\n";
    char buf[40];
    for (const auto& v : values) {
        std::snprintf(buf, sizeof buf, ",%.10g\n", v.value);
        out += year_month(v.year, v.month) + buf;
    }
    return out;
}

std::vector<ClimateRow> climate_merge(const std::vector<MonthlyValue>& temp, const std::vector<MonthlyValue>& co2,
                                      const std::vector<MonthlyValue>* index) {
    auto to_map = [](const std::vector<MonthlyValue>& v, const char* what) {
        std::map<int, double> m;
        for (const auto& x : v)
            if (!m.emplace(month_index(x.year, x.month), x.value).second)
                throw std::invalid_argument(std::string(what) + " has a duplicate month " + year_month(x.year, x.month));
        if (m.empty()) throw std::invalid_argument(std::string(what) + " series is empty");
        return m;
    };
    const auto mt = to_map(temp, "temperature");
    const auto mc = to_map(co2, "co2");
    std::map<int, double> mi;
    if (index) mi = to_map(*index, "index");
    int start = std::max(mt.begin()->first, mc.begin()->first);
    int end = std::min(mt.rbegin()->first, mc.rbegin()->first);
    if (index) {
        start = std::max(start, mi.begin()->first);
        end = std::min(end, mi.rbegin()->first);
    }
    if (start > end) throw std::invalid_argument("series do not overlap");
    std::vector<ClimateRow> rows;
    for (int k = start; k <= end; ++k) {
        const int year = k / 12, month = k % 12 + 1;
        const auto t = mt.find(k);
        const auto c = mc.find(k);
        if (t == mt.end() || c == mc.end())
            throw std::invalid_argument("missing month " + year_month(year, month) + " inside the common window");
        ClimateRow r{year, month, t->second, c->second, std::nullopt};
        if (index) {
            const auto i = mi.find(k);
            if (i == mi.end()) throw std::invalid_argument("missing index month " + year_month(year, month));
            r.index = i->second;
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace densum
