#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "densum/concentration.hpp"
#include "densum/core_model.hpp"
#include "densum/simulation.hpp"
#include "densum/u_class.hpp"

namespace densum {

inline constexpr std::string_view kToolVersion = "0.1.0";

// ------------------------------------------------------------------ CSV in

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  ///< source line of each row, 1-based

    [[nodiscard]] std::optional<std::size_t> column_index(std::string_view name) const;
};

/// RFC 4180 style: quoted fields, header required, blank and '#' lines skipped.
[[nodiscard]] CsvTable parse_csv(std::string_view text);
/// Throws std::invalid_argument for a missing column, ParseError for a
/// non-numeric cell (naming its line).
[[nodiscard]] std::vector<double> numeric_column(const CsvTable& table, std::string_view name);

/// 64-bit FNV-1a of the input, as 16 hex digits.
[[nodiscard]] std::string fnv1a_hex(std::string_view data);

/// printf %.6g, with NA for non-finite values.
[[nodiscard]] std::string format_number(double v);

// ------------------------------------------------------------ config files

/// key = value lines grouped under [section] headers; '#' starts a comment.
struct ConfigFile {
    std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> sections;

    [[nodiscard]] const std::vector<std::pair<std::string, std::string>>* section(std::string_view name) const;
};

[[nodiscard]] ConfigFile parse_config(std::string_view text);
/// Applies section [tableN] of `file` (and shared keys of [analysis]) on top of `base`.
[[nodiscard]] ExperimentConfig experiment_config_from(const ConfigFile& file, int table, ExperimentConfig base = {});
/// Applies one key = value setting; throws std::invalid_argument for unknown keys.
void apply_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);

// --------------------------------------------------------- simulation CSV

inline constexpr std::string_view kSimulateCsvStamp = "# densum-simulate-csv v1";

[[nodiscard]] std::string coverage_csv_header();
[[nodiscard]] std::string coverage_csv_row(const CoverageReport& row);
[[nodiscard]] std::string coverage_csv(const std::vector<CoverageReport>& rows);

// --------------------------------------------------------------- reports

/// Range option as given on the command line: known=R | residual | two-mean | marginal=R.
struct RangeOption {
    RangeSource source = RangeSource::residual_range;
    double value = 0.0;  ///< R for known and marginal
};

[[nodiscard]] RangeOption parse_range_option(std::string_view text);
[[nodiscard]] std::string to_string(const RangeOption& r);

struct CoefficientRow {
    std::string name;
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::string method;
    std::string range_source;
    double range_value = 0.0;  ///< the R or R_hat_s that set the width

    friend bool operator==(const CoefficientRow&, const CoefficientRow&) = default;
};

struct SeriesDiagnostics {
    std::string series;  ///< "weighted_residuals:<coef>" or "residuals"
    UDiagnosticsReport u;
    double rule_of_thumb = 0.0;  ///< bound on phi: (n-1)^-1 {R^2/(12 S^2) - 1}
    std::size_t lag_short = 0;
    std::size_t lag_long = 0;
    double phi_hat_short = 0.0;
    double phi_hat_long = 0.0;
    std::vector<std::string> notes;

    friend bool operator==(const SeriesDiagnostics&, const SeriesDiagnostics&) = default;
};

struct PartitionReport {
    std::string coefficient;
    std::vector<std::string> partitions;
    std::vector<double> values;
    std::size_t recommended = 0;
    std::vector<std::pair<std::size_t, std::size_t>> ties;

    friend bool operator==(const PartitionReport&, const PartitionReport&) = default;
};

struct RetentionRow {
    std::string dropped;
    double estimate_with = 0.0;
    double estimate_without = 0.0;
    double relative_change = 0.0;
    bool meets_threshold = false;  ///< |change| >= 10%

    friend bool operator==(const RetentionRow&, const RetentionRow&) = default;
};

struct Provenance {
    std::string input_hash;
    std::uint64_t seed = 0;
    std::string config;
    std::string tool_version{kToolVersion};

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct AnalysisReport {
    std::string model;
    std::size_t n = 0;
    double alpha = 0.05;
    std::vector<CoefficientRow> coefficients;
    std::vector<SeriesDiagnostics> diagnostics;
    std::vector<PartitionReport> partitions;
    std::vector<RetentionRow> retention;
    std::vector<std::string> warnings;
    Provenance provenance;

    friend bool operator==(const AnalysisReport&, const AnalysisReport&) = default;
};

[[nodiscard]] std::string report_to_json(const AnalysisReport& report, int indent = 2);
[[nodiscard]] AnalysisReport report_from_json(std::string_view json);
[[nodiscard]] std::string report_to_text(const AnalysisReport& report);

// -------------------------------------------------------------- commands

struct CiOptions {
    std::string column;
    double alpha = 0.05;
    Method method = Method::u_sharp;
    RangeOption range;
};

struct CiReport {
    ConfidenceSet set;
    std::size_t n = 0;
    double mean = 0.0;
    double range_value = 0.0;
    std::vector<std::string> warnings;
    Provenance provenance;
};

[[nodiscard]] CiReport run_ci(std::string_view csv_text, const CiOptions& options);
[[nodiscard]] std::string ci_to_json(const CiReport& report, int indent = 2);
[[nodiscard]] std::string ci_to_text(const CiReport& report);

struct FitOptions {
    std::string response;
    std::vector<std::string> covariates;
    bool intercept = true;
    double alpha = 0.05;
    RangeOption range;
    /// Each entry is a label column name or "seq:K".
    std::vector<std::string> partitions;
    /// Coefficient whose with/without estimates drive the retention screen.
    std::string focus;
    std::uint64_t seed = 0;
};

[[nodiscard]] AnalysisReport run_fit(std::string_view csv_text, const FitOptions& options);

struct DiagnoseOptions {
    std::string column;  ///< diagnose a column directly, or
    FitOptions fit;      ///< the weighted residuals of `coefficient` in this fit
    std::string coefficient;
    std::size_t histogram_bins = 0;  ///< 0: Sturges
};

struct DiagnoseReport {
    std::string series;
    std::size_t n = 0;
    SeriesDiagnostics diagnostics;
    std::vector<double> acf_short;
    std::vector<double> acf_long;
    std::vector<double> histogram_edges;
    std::vector<std::size_t> histogram_counts;
    std::vector<std::pair<double, double>> ecdf;
    Provenance provenance;
};

[[nodiscard]] DiagnoseReport run_diagnose(std::string_view csv_text, const DiagnoseOptions& options);
[[nodiscard]] std::string diagnose_to_json(const DiagnoseReport& report, int indent = 2);
/// Plot-ready long format: series,x,y for histogram, ecdf and both acf windows.
[[nodiscard]] std::string diagnose_plot_csv(const DiagnoseReport& report);
[[nodiscard]] std::string diagnose_to_text(const DiagnoseReport& report);

// ----------------------------------------------------------------- climate

struct ClimateRow {
    int year = 0;
    int month = 0;
    double temp = 0.0;
    double co2 = 0.0;
    std::optional<double> index;
};

enum class ClimateUnit { monthly, yearly };

/// Columns date (YYYY-MM), temp, co2 and optional index. Dates must be
/// strictly increasing without gaps.
[[nodiscard]] std::vector<ClimateRow> parse_climate_csv(std::string_view text);
[[nodiscard]] std::string climate_csv(const std::vector<ClimateRow>& rows);

struct ModelFrame {
    std::vector<std::string> columns;
    std::vector<std::string> labels;  ///< YYYY-MM or YYYY per row
    Matrix data;
};

/// Monthly: temp, temp_lag1, log_co2_lag1, [log_index_lag1], spring, summer,
/// fall (winter reference, season of the response month). Yearly: complete
/// calendar years averaged (logs averaged), then lagged once.
[[nodiscard]] ModelFrame climate_prepare(const std::vector<ClimateRow>& rows, ClimateUnit unit);
[[nodiscard]] std::string model_frame_csv(const ModelFrame& frame);

/// (year, month, value) series in a normalized two-column CSV: date,value.
struct MonthlyValue {
    int year = 0;
    int month = 0;
    double value = 0.0;
};

/// GISTEMP table layout: Year,Jan..Dec,...; "***" marks a missing month.
[[nodiscard]] std::vector<MonthlyValue> normalize_gistemp(std::string_view text);
/// NOAA GML monthly CO2 layout: '#' comments, then year,month,...,average,...
[[nodiscard]] std::vector<MonthlyValue> normalize_co2(std::string_view text);
[[nodiscard]] std::vector<MonthlyValue> parse_monthly_csv(std::string_view text);
[[nodiscard]] std::string monthly_csv(const std::vector<MonthlyValue>& values);

/// Joins temperature, CO2 and optional index on their common contiguous window.
[[nodiscard]] std::vector<ClimateRow> climate_merge(const std::vector<MonthlyValue>& temp,
                                                    const std::vector<MonthlyValue>& co2,
                                                    const std::vector<MonthlyValue>* index = nullptr);

}  // namespace densum
