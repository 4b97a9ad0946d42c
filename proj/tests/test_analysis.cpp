#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

#include "densum/analysis.hpp"
#include "densum/errors.hpp"

using namespace densum;

namespace {

std::string column_csv(const std::string& name, const std::vector<double>& v) {
    std::string s = name + "\n";
    char buf[64];
    for (const double x : v) {
        std::snprintf(buf, sizeof buf, "%.17g\n", x);
        s += buf;
    }
    return s;
}

std::vector<double> uniforms(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

std::string line_csv(std::size_t n, double noise, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-noise, noise);
    std::string s = "x,z,y\n";
    char buf[128];
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) / 10.0;
        const double z = std::sin(0.7 * static_cast<double>(i));
        const double y = 1.0 + 2.0 * x - 0.5 * z + (noise > 0 ? u(rng) : 0.0);
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", x, z, y);
        s += buf;
    }
    return s;
}

std::vector<ClimateRow> synthetic_climate(int first_year, int last_year) {
    std::vector<ClimateRow> rows;
    int k = 0;
    for (int y = first_year; y <= last_year; ++y)
        for (int m = 1; m <= 12; ++m, ++k)
            rows.push_back({y, m, 0.01 * k + 0.1 * std::sin(k), 336.0 + 0.15 * k, 100.0 + 0.05 * k});
    return rows;
}

}  // namespace

TEST(Csv, ParsesQuotesCommentsAndBlankLines) {
    const CsvTable t = parse_csv("# note\na,\"b,c\"\n\n1,\"x \"\"y\"\"\"\n2,3\n");
    ASSERT_EQ(t.header, (std::vector<std::string>{"a", "b,c"}));
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.rows[0][1], "x \"y\"");
    EXPECT_EQ(t.line_numbers[1], 5u);
    EXPECT_EQ(t.column_index("b,c"), 1u);
    EXPECT_FALSE(t.column_index("z").has_value());
}

TEST(Csv, Errors) {
    try {
        (void)parse_csv("a,b\n1,2\n3\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW((void)parse_csv(""), ParseError);
    const CsvTable t = parse_csv("a\n1\nfoo\n");
    try {
        (void)numeric_column(t, "a");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW((void)numeric_column(t, "b"), std::invalid_argument);
}

TEST(Format, NumbersAndHash) {
    EXPECT_EQ(format_number(0.0120240481), "0.012024");
    EXPECT_EQ(format_number(NAN), "NA");
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(Config, SectionsAndOverrides) {
    const ConfigFile f = parse_config("; top\n[analysis]\nseed = 11\nreps=50\n[Table2]\nalpha_shape = 10, 50\n# c\n");
    ASSERT_NE(f.section("table2"), nullptr);
    const ExperimentConfig c = experiment_config_from(f, 2);
    EXPECT_EQ(c.seed, 11u);
    EXPECT_EQ(c.reps, 50u);
    EXPECT_EQ(c.alpha_shapes, (std::vector<double>{10, 50}));
    EXPECT_EQ(experiment_config_from(f, 1).alpha_shapes.size(), 0u);
    EXPECT_THROW((void)parse_config("[table1\n"), ParseError);
    EXPECT_THROW((void)parse_config("novalue\n"), ParseError);
    EXPECT_THROW((void)experiment_config_from(parse_config("[table1]\nbogus = 1\n"), 1), std::invalid_argument);
    EXPECT_THROW((void)experiment_config_from(parse_config("[table1]\nn = 100\nphi = -0.02\n"), 1),
                 std::invalid_argument);
}

TEST(CoverageCsv, StampedAndSchemaStable) {
    CoverageReport r;
    r.table = 3;
    r.n = 100;
    r.phi = 0.15;
    r.coefficient = 1;
    r.ci_u = 0.978;
    r.seed = 7;
    const std::string csv = coverage_csv({r});
    EXPECT_EQ(csv.rfind(std::string(kSimulateCsvStamp) + "\n", 0), 0u);
    EXPECT_NE(csv.find("\n" + coverage_csv_header() + "\n"), std::string::npos);
    const std::string row = coverage_csv_row(r);
    EXPECT_EQ(row.substr(0, 20), "3,100,0.15,NA,beta1,");
    const CsvTable t = parse_csv(csv);
    EXPECT_EQ(t.header.size(), 16u);
    EXPECT_EQ(t.rows[0][10], "NA");
}

TEST(RangeOption, Parsing) {
    EXPECT_EQ(parse_range_option("known=1.5").source, RangeSource::known);
    EXPECT_EQ(parse_range_option("known=1.5").value, 1.5);
    EXPECT_EQ(parse_range_option("residual").source, RangeSource::residual_range);
    EXPECT_EQ(parse_range_option("two-mean").source, RangeSource::two_mean);
    EXPECT_EQ(parse_range_option("marginal=40").source, RangeSource::marginal_range);
    EXPECT_THROW((void)parse_range_option("known"), std::invalid_argument);
    EXPECT_THROW((void)parse_range_option("known=-1"), std::invalid_argument);
    EXPECT_THROW((void)parse_range_option("residual=2"), std::invalid_argument);
    EXPECT_THROW((void)parse_range_option("bogus"), std::invalid_argument);
    EXPECT_EQ(parse_range_option(to_string(parse_range_option("known=2"))).value, 2.0);
}

TEST(Ci, KnownRangeUSharp) {
    const auto v = uniforms(100, 1);
    CiOptions o;
    o.column = "y";
    o.range = parse_range_option("known=1");
    const CiReport r = run_ci(column_csv("y", v), o);
    double mean = 0.0;
    for (const double x : v) mean += x;
    mean /= 100.0;
    EXPECT_NEAR(r.set.center(), mean, 1e-12);
    EXPECT_NEAR(r.set.half_width(), 0.0784100276, 1e-9);
    EXPECT_NE(ci_to_json(r).find("\"u_sharp\""), std::string::npos);
}

TEST(Ci, RatioNeedsLargerSample) {
    CiOptions o;
    o.column = "y";
    o.method = Method::hoeffding_ratio;
    o.range = parse_range_option("known=1");
    try {
        (void)run_ci(column_csv("y", {0.1, 0.2, 0.3, 0.4, 0.5}), o);
        FAIL();
    } catch (const std::exception& e) {
        EXPECT_NE(std::string(e.what()).find("7.378"), std::string::npos) << e.what();
    }
}

TEST(Ci, ConstantColumnDegenerate) {
    CiOptions o;
    o.column = "c";
    const CiReport r = run_ci(column_csv("c", {3.5, 3.5, 3.5, 3.5}), o);
    EXPECT_EQ(r.set.lower, 3.5);
    EXPECT_EQ(r.set.upper, 3.5);
    ASSERT_EQ(r.warnings.size(), 1u);
    o.column = "missing";
    EXPECT_THROW((void)run_ci(column_csv("c", {1.0, 2.0}), o), std::invalid_argument);
}

TEST(Fit, ZeroNoiseGivesDegenerateIntervalsAtTruth) {
    FitOptions o;
    o.response = "y";
    o.covariates = {"x", "z"};
    const AnalysisReport r = run_fit(line_csv(40, 0.0, 1), o);
    ASSERT_EQ(r.coefficients.size(), 3u);
    const double truth[] = {1.0, 2.0, -0.5};
    for (std::size_t k = 0; k < 3; ++k) {
        const auto& c = r.coefficients[k];
        EXPECT_EQ(c.range_value, 0.0);
        EXPECT_EQ(c.lower, c.upper);
        EXPECT_NEAR(c.estimate, truth[k], 1e-12);
        EXPECT_EQ(c.range_source, "residual_range");
    }
    EXPECT_EQ(r.warnings.size(), 3u);
    EXPECT_EQ(r.model, "y ~ (intercept) + x + z");
}

TEST(Fit, NoisyFixtureCoversTruth) {
    FitOptions o;
    o.response = "y";
    o.covariates = {"x", "z"};
    o.partitions = {"seq:10", "seq:20"};
    o.focus = "x";
    const AnalysisReport r = run_fit(line_csv(200, 0.5, 2), o);
    const double truth[] = {1.0, 2.0, -0.5};
    for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_LE(r.coefficients[k].lower, truth[k]);
        EXPECT_GE(r.coefficients[k].upper, truth[k]);
        EXPECT_GT(r.coefficients[k].range_value, 0.0);
    }
    // One diagnostics block per coefficient plus the raw residuals.
    ASSERT_EQ(r.diagnostics.size(), 4u);
    EXPECT_EQ(r.diagnostics[1].series, "weighted_residuals:x");
    EXPECT_EQ(r.diagnostics[3].series, "residuals");
    EXPECT_EQ(r.diagnostics[3].lag_short, 23u);
    EXPECT_EQ(r.diagnostics[3].lag_long, 99u);
    ASSERT_EQ(r.partitions.size(), 3u);
    EXPECT_EQ(r.partitions[0].values.size(), 2u);
    ASSERT_EQ(r.retention.size(), 1u);
    EXPECT_EQ(r.retention[0].dropped, "z");
    EXPECT_EQ(r.retention[0].estimate_with, r.coefficients[1].estimate);
    EXPECT_EQ(r.provenance.input_hash.size(), 16u);
}

TEST(Fit, DuplicateColumnNamed) {
    std::string csv = "x,x2,y\n";
    for (int i = 0; i < 10; ++i) csv += std::to_string(i) + "," + std::to_string(i) + "," + std::to_string(i * i) + "\n";
    FitOptions o;
    o.response = "y";
    o.covariates = {"x", "x2"};
    try {
        (void)run_fit(csv, o);
        FAIL();
    } catch (const RankDeficientError& e) {
        EXPECT_NE(std::string(e.what()).find("'x2'"), std::string::npos) << e.what();
    }
    o.covariates = {"x", "w"};
    EXPECT_THROW((void)run_fit(csv, o), std::invalid_argument);
}

TEST(Fit, OtherRangeSources) {
    FitOptions o;
    o.response = "y";
    o.covariates = {"x"};
    o.range = parse_range_option("known=2");
    const std::string csv = line_csv(50, 0.5, 3);
    const AnalysisReport known = run_fit(csv, o);
    EXPECT_EQ(known.coefficients[0].range_source, "known");
    EXPECT_EQ(known.coefficients[0].range_value, 2.0);
    o.range = parse_range_option("marginal=2");
    const AnalysisReport marginal = run_fit(csv, o);
    EXPECT_NEAR(marginal.coefficients[1].upper - marginal.coefficients[1].lower,
                known.coefficients[1].upper - known.coefficients[1].lower, 1e-12);
    o.range = parse_range_option("two-mean");
    EXPECT_EQ(run_fit(csv, o).coefficients[0].range_source, "two_mean");
}

TEST(Report, JsonRoundTrip) {
    FitOptions o;
    o.response = "y";
    o.covariates = {"x", "z"};
    o.partitions = {"seq:5", "seq:10", "seq:25"};
    o.focus = "z";
    o.seed = 42;
    const AnalysisReport r = run_fit(line_csv(100, 0.3, 4), o);
    const std::string js = report_to_json(r);
    EXPECT_NE(js.find("\"u_class\""), std::string::npos);
    EXPECT_EQ(report_from_json(js), r);
    EXPECT_EQ(report_from_json(report_to_json(r, -1)), r);
    EXPECT_THROW((void)report_from_json("{\"model\": 3}"), ParseError);
    EXPECT_THROW((void)report_from_json("not json"), ParseError);
    EXPECT_FALSE(report_to_text(r).empty());
}

TEST(Diagnose, SymmetricUniformSample) {
    DiagnoseOptions o;
    o.column = "y";
    const DiagnoseReport r = run_diagnose(column_csv("y", uniforms(500, 5)), o);
    EXPECT_TRUE(r.diagnostics.u.is_u);
    EXPECT_LT(std::fabs(r.diagnostics.phi_hat_short), 0.05);
    EXPECT_EQ(r.acf_short.size(), 26u);
    EXPECT_EQ(r.acf_long.size(), 249u);
    std::size_t total = 0;
    for (const auto c : r.histogram_counts) total += c;
    EXPECT_EQ(total, 500u);
    EXPECT_EQ(r.histogram_counts.size(), 10u);
    EXPECT_EQ(r.histogram_edges.size(), 11u);
    EXPECT_EQ(r.ecdf.size(), 500u);
    EXPECT_EQ(r.ecdf.back().second, 1.0);
    const std::string plot = diagnose_plot_csv(r);
    EXPECT_EQ(plot.rfind("# densum-diagnose-csv v1\nseries,x,y\n", 0), 0u);
}

TEST(Diagnose, AlternatingFlagged) {
    std::vector<double> z(60);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = i % 2 ? 1.0 : -1.0;
    DiagnoseOptions o;
    o.column = "z";
    const DiagnoseReport r = run_diagnose(column_csv("z", z), o);
    EXPECT_NEAR(r.acf_short[0], -59.0 / 60.0, 1e-12);
    bool flagged = false;
    for (const auto& n : r.diagnostics.notes) flagged |= n.find("alternating") != std::string::npos;
    EXPECT_TRUE(flagged);
}

TEST(Diagnose, ConstantSeriesRejected) {
    DiagnoseOptions o;
    o.column = "c";
    EXPECT_THROW((void)run_diagnose(column_csv("c", {2, 2, 2, 2}), o), std::domain_error);
}

TEST(Diagnose, WeightedResidualsOfFit) {
    DiagnoseOptions o;
    o.fit.response = "y";
    o.fit.covariates = {"x"};
    o.coefficient = "x";
    const DiagnoseReport r = run_diagnose(line_csv(120, 0.5, 6), o);
    EXPECT_EQ(r.n, 120u);
    EXPECT_EQ(r.diagnostics.lag_short, 20u);
    o.coefficient = "nope";
    EXPECT_THROW((void)run_diagnose(line_csv(120, 0.5, 6), o), std::invalid_argument);
}

TEST(Climate, MonthlyAndYearlyFrames) {
    const auto rows = synthetic_climate(1979, 2022);
    ASSERT_EQ(rows.size(), 528u);
    const ModelFrame m = climate_prepare(rows, ClimateUnit::monthly);
    EXPECT_EQ(m.data.rows(), 527);
    EXPECT_EQ(m.columns, (std::vector<std::string>{"temp", "temp_lag1", "log_co2_lag1", "log_index_lag1", "spring",
                                                   "summer", "fall"}));
    EXPECT_EQ(m.labels.front(), "1979-02");
    EXPECT_EQ(m.data(0, 1), rows[0].temp);
    EXPECT_NEAR(m.data(0, 2), std::log(rows[0].co2), 1e-15);
    // 1980-01 is row 11: winter, all dummies zero.
    EXPECT_EQ(m.labels[11], "1980-01");
    EXPECT_EQ(m.data.row(11).tail(3).sum(), 0.0);
    EXPECT_EQ(m.data(1, 4), 1.0);  // 1979-03 spring
    EXPECT_EQ(m.data(4, 5), 1.0);  // 1979-06 summer
    EXPECT_EQ(m.data(7, 6), 1.0);  // 1979-09 fall
    EXPECT_EQ(m.data(10, 4) + m.data(10, 5) + m.data(10, 6), 0.0);  // 1979-12 winter

    const ModelFrame y = climate_prepare(rows, ClimateUnit::yearly);
    EXPECT_EQ(y.data.rows(), 43);
    EXPECT_EQ(y.labels.front(), "1980");
    double mean_log = 0.0;
    for (int k = 0; k < 12; ++k) mean_log += std::log(rows[k].co2) / 12.0;
    EXPECT_NEAR(y.data(0, 1), mean_log, 1e-12);

    const CsvTable t = parse_csv(model_frame_csv(m));
    EXPECT_EQ(t.rows.size(), 527u);
    EXPECT_EQ(t.header.front(), "date");
}

TEST(Climate, GapsAndCsvRoundTrip) {
    auto rows = synthetic_climate(2000, 2001);
    const auto back = parse_climate_csv(climate_csv(rows));
    ASSERT_EQ(back.size(), rows.size());
    EXPECT_NEAR(back[5].co2, rows[5].co2, 1e-9);
    EXPECT_TRUE(back[5].index.has_value());
    rows.erase(rows.begin() + 6);
    EXPECT_THROW((void)climate_prepare(rows, ClimateUnit::monthly), std::invalid_argument);
    EXPECT_THROW((void)parse_climate_csv(climate_csv(rows)), ParseError);
    auto bad = synthetic_climate(2000, 2000);
    bad[3].co2 = 0.0;
    EXPECT_THROW((void)climate_prepare(bad, ClimateUnit::monthly), std::domain_error);
}

TEST(Climate, NormalizeUpstreamLayouts) {
    const std::string gis =
        "Land-Ocean: Global Means\n"
        "Year,Jan,Feb,Mar,Apr,May,Jun,Jul,Aug,Sep,Oct,Nov,Dec,J-D\n"
        "1980,.1,.2,.3,.4,.5,.6,.7,.8,.9,1.0,1.1,1.2,.65\n"
        "1981,.2,.3,***,***,***,***,***,***,***,***,***,***,***\n";
    const auto t = normalize_gistemp(gis);
    ASSERT_EQ(t.size(), 14u);
    EXPECT_EQ(t[13].year, 1981);
    EXPECT_EQ(t[13].month, 2);
    EXPECT_DOUBLE_EQ(t[13].value, 0.3);
    try {
        (void)normalize_gistemp(gis + "1982,.1,.2\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 5u);
    }
    EXPECT_THROW((void)normalize_gistemp("nothing here\n"), ParseError);

    const std::string co2 =
        "# comment\n"
        "year,month,decimal date,average,deseasonalized\n"
        "1980,1,1980.042,338.45,337.80\n"
        "1980,2,1980.125,-99.99,338.10\n"
        "1980,3,1980.208,340.12,338.90\n";
    const auto c = normalize_co2(co2);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[1].month, 3);
    try {
        (void)normalize_co2(co2 + "1980,x,1,2,3\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 6u);
    }

    const auto again = parse_monthly_csv(monthly_csv(t));
    ASSERT_EQ(again.size(), t.size());
    EXPECT_DOUBLE_EQ(again[7].value, t[7].value);
}

TEST(Climate, MergeOnCommonWindow) {
    std::vector<MonthlyValue> temp, co2;
    for (int m = 1; m <= 12; ++m) temp.push_back({2000, m, 0.1 * m});
    for (int m = 4; m <= 12; ++m) co2.push_back({2000, m, 370.0 + m});
    co2.push_back({2001, 1, 380.0});
    const auto rows = climate_merge(temp, co2);
    ASSERT_EQ(rows.size(), 9u);
    EXPECT_EQ(rows.front().month, 4);
    EXPECT_DOUBLE_EQ(rows.front().temp, 0.4);
    EXPECT_FALSE(rows.front().index.has_value());
    temp.erase(temp.begin() + 6);
    EXPECT_THROW((void)climate_merge(temp, co2), std::invalid_argument);
    co2.push_back(co2.back());
    EXPECT_THROW((void)climate_merge(co2, co2), std::invalid_argument);
}
