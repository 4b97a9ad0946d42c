#include "densum/densum.h"

#include <exception>
#include <new>
#include <stdexcept>
#include <string>

#include "densum/analysis.hpp"
#include "densum/concentration.hpp"
#include "densum/errors.hpp"
#include "densum/estimators.hpp"
#include "densum/variance_identity.hpp"

struct densum_string {
    std::string text;
};

struct densum_fit {
    densum::RegressionFit fit;
};

struct densum_config {
    densum::ExperimentConfig config;
};

namespace {

thread_local std::string g_last_error;
thread_local std::size_t g_last_line = 0;

densum_status fail(densum_status status, const char* message, std::size_t line = 0) {
    g_last_error = message;
    g_last_line = line;
    return status;
}

// Maps the exception in flight to a status code and records its message.
densum_status translate() {
    try {
        throw;
    } catch (const densum::ParseError& e) {
        return fail(DENSUM_E_PARSE, e.what(), e.line());
    } catch (const densum::RankDeficientError& e) {
        return fail(DENSUM_E_RANK_DEFICIENT, e.what());
    } catch (const densum::ConvergenceError& e) {
        return fail(DENSUM_E_CONVERGENCE, e.what());
    } catch (const densum::NotPositiveDefiniteError& e) {
        return fail(DENSUM_E_NOT_POSITIVE_DEFINITE, e.what());
    } catch (const std::domain_error& e) {
        return fail(DENSUM_E_DOMAIN, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(DENSUM_E_INVALID_ARGUMENT, e.what());
    } catch (const std::out_of_range& e) {
        return fail(DENSUM_E_INVALID_ARGUMENT, e.what());
    } catch (const std::bad_alloc&) {
        return fail(DENSUM_E_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(DENSUM_E_INTERNAL, e.what());
    } catch (...) {
        return fail(DENSUM_E_INTERNAL, "unknown error");
    }
}

template <class F>
densum_status guarded(F&& body) {
    g_last_error.clear();
    g_last_line = 0;
    try {
        body();
        return DENSUM_OK;
    } catch (...) {
        return translate();
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

std::string_view text_or_empty(const char* s) { return s ? std::string_view(s) : std::string_view(); }

densum::Method to_method(densum_method m) {
    switch (m) {
        case DENSUM_METHOD_HOEFFDING: return densum::Method::hoeffding;
        case DENSUM_METHOD_U_SHARP: return densum::Method::u_sharp;
        case DENSUM_METHOD_BERNSTEIN: return densum::Method::bernstein;
        case DENSUM_METHOD_WALD: return densum::Method::wald;
        case DENSUM_METHOD_HOEFFDING_RATIO: return densum::Method::hoeffding_ratio;
    }
    throw std::invalid_argument("unknown method");
}

densum::FitOptions to_fit_options(const densum_fit_options* o) {
    require(o != nullptr, "fit options are required");
    densum::FitOptions f;
    f.response = text_or_empty(o->response);
    require(o->n_covariates == 0 || o->covariates, "covariates pointer is null");
    for (std::size_t i = 0; i < o->n_covariates; ++i) {
        require(o->covariates[i] != nullptr, "covariate name is null");
        f.covariates.emplace_back(o->covariates[i]);
    }
    f.intercept = o->intercept != 0;
    f.alpha = o->alpha;
    if (o->range && *o->range) f.range = densum::parse_range_option(o->range);
    require(o->n_partitions == 0 || o->partitions, "partitions pointer is null");
    for (std::size_t i = 0; i < o->n_partitions; ++i) {
        require(o->partitions[i] != nullptr, "partition spec is null");
        f.partitions.emplace_back(o->partitions[i]);
    }
    f.focus = text_or_empty(o->focus);
    f.seed = o->seed;
    return f;
}

void emit(densum_string** out, std::string text) {
    require(out != nullptr, "output pointer is null");
    *out = new densum_string{std::move(text)};
}

}  // namespace

extern "C" {

const char* densum_last_error(void) { return g_last_error.c_str(); }
size_t densum_last_error_line(void) { return g_last_line; }
const char* densum_version(void) { return densum::kToolVersion.data(); }

const char* densum_string_data(const densum_string* s) { return s ? s->text.c_str() : ""; }
size_t densum_string_size(const densum_string* s) { return s ? s->text.size() : 0; }
void densum_string_free(densum_string* s) { delete s; }

densum_status densum_phi_bounds(double mu, size_t n, double* lower, double* upper) {
    return guarded([&] {
        require(lower && upper, "output pointer is null");
        const densum::Interval i = densum::phi_bounds(mu, n);
        *lower = i.lower;
        *upper = i.upper;
    });
}

densum_status densum_u_multiplier(double alpha, double* out) {
    return guarded([&] {
        require(out != nullptr, "output pointer is null");
        *out = densum::u_multiplier(alpha);
    });
}

densum_status densum_ci_mean(const double* y, size_t n, double range, double alpha, densum_method method,
                             double* lower, double* upper) {
    return guarded([&] {
        require(y && lower && upper, "null pointer argument");
        const densum::SampleSummary s = densum::summarize(std::span<const double>(y, n));
        const densum::ConfidenceSet cs = densum::ci_mean(s, range, alpha, to_method(method), s.min >= 0.0);
        *lower = cs.lower;
        *upper = cs.upper;
    });
}

densum_status densum_variance_identity(const double* cov, const double* w, size_t n, double* naive, double* total,
                                       double* mu, double* phi) {
    return guarded([&] {
        require(cov && w && naive && total && mu && phi, "null pointer argument");
        require(n > 0, "n must be positive");
        const auto ni = static_cast<Eigen::Index>(n);
        const densum::Matrix c =
            Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cov, ni, ni);
        const std::span<const double> ws(w, n);
        const densum::DependencySummary dep = densum::summaries_from_covariance(c, ws);
        const densum::Vector var = c.diagonal();
        const densum::VarianceDecomposition d =
            densum::additive_variance(ws, std::span<const double>(var.data(), n), dep);
        *naive = d.naive(0, 0);
        *total = d.total(0, 0);
        *mu = dep.mu;
        *phi = dep.phi;
    });
}

densum_status densum_fit_ols(const double* x, size_t n, size_t p, const double* y, densum_fit** out) {
    if (out) *out = nullptr;
    return guarded([&] {
        require(x && y && out, "null pointer argument");
        require(n > 0 && p > 0, "design must be nonempty");
        const densum::Matrix xm =
            Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                x, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
        *out = new densum_fit{densum::ols_fit(xm, std::span<const double>(y, n))};
    });
}

void densum_fit_free(densum_fit* fit) { delete fit; }
size_t densum_fit_n(const densum_fit* fit) { return fit ? fit->fit.n() : 0; }
size_t densum_fit_p(const densum_fit* fit) { return fit ? fit->fit.p() : 0; }

densum_status densum_fit_coefficients(const densum_fit* fit, double* out, size_t p) {
    return guarded([&] {
        require(fit && out, "null pointer argument");
        require(p == fit->fit.p(), "buffer size does not match the number of coefficients");
        for (size_t s = 0; s < p; ++s) out[s] = fit->fit.coefficients(static_cast<Eigen::Index>(s));
    });
}

densum_status densum_fit_residuals(const densum_fit* fit, double* out, size_t n) {
    return guarded([&] {
        require(fit && out, "null pointer argument");
        require(n == fit->fit.n(), "buffer size does not match the number of observations");
        for (size_t i = 0; i < n; ++i) out[i] = fit->fit.residuals(static_cast<Eigen::Index>(i));
    });
}

densum_status densum_fit_ci(const densum_fit* fit, size_t s, double alpha, double* lower, double* upper,
                            double* range) {
    return guarded([&] {
        require(fit && lower && upper, "null pointer argument");
        require(s < fit->fit.p(), "coefficient index out of range");
        const densum::ResidualRange rr = densum::residual_range(fit->fit, s);
        const densum::Vector ws = fit->fit.weight_rows.row(static_cast<Eigen::Index>(s)).transpose();
        const densum::ConfidenceSet cs =
            densum::ci_linear(fit->fit.coefficients(static_cast<Eigen::Index>(s)),
                              std::span<const double>(ws.data(), fit->fit.n()),
                              densum::WeightedResidualRange{rr.value}, alpha);
        *lower = cs.lower;
        *upper = cs.upper;
        if (range) *range = rr.value;
    });
}

densum_status densum_fit_cluster_variance(const densum_fit* fit, const size_t* assignment, size_t n, size_t s,
                                          double* out) {
    return guarded([&] {
        require(fit && assignment && out, "null pointer argument");
        require(n == fit->fit.n(), "assignment length does not match the number of observations");
        require(s < fit->fit.p(), "coefficient index out of range");
        const densum::Partition part(std::vector<std::size_t>(assignment, assignment + n));
        *out = densum::cluster_robust(fit->fit, part, s).value;
    });
}

densum_status densum_config_new(int table, densum_config** out) {
    return guarded([&] {
        require(out != nullptr, "output pointer is null");
        require(table >= 1 && table <= 3, "table must be 1, 2 or 3");
        auto* c = new densum_config{};
        c->config.table = table;
        *out = c;
    });
}

void densum_config_free(densum_config* config) { delete config; }

densum_status densum_config_set(densum_config* config, const char* key, const char* value) {
    return guarded([&] {
        require(config && key && value, "null pointer argument");
        densum::apply_config_value(config->config, key, value);
    });
}

densum_status densum_config_load(densum_config* config, const char* text) {
    return guarded([&] {
        require(config && text, "null pointer argument");
        const densum::ConfigFile file = densum::parse_config(text);
        config->config = densum::experiment_config_from(file, config->config.table, config->config);
    });
}

densum_status densum_config_validate(const densum_config* config) {
    return guarded([&] {
        require(config != nullptr, "null pointer argument");
        config->config.validate();
    });
}

densum_status densum_simulate(const densum_config* config, densum_progress_fn progress, void* user,
                              densum_string** csv_out) {
    return guarded([&] {
        require(config && csv_out, "null pointer argument");
        densum::ExperimentConfig c = config->config;
        if (progress) {
            c.on_row = [progress, user](const densum::CoverageReport& r) {
                progress(densum::coverage_csv_row(r).c_str(), user);
            };
        }
        emit(csv_out, densum::coverage_csv(densum::run_experiment(c)));
    });
}

densum_status densum_analyze_ci(const char* csv, const char* column, densum_method method, const char* range,
                                double alpha, densum_format format, densum_string** out) {
    return guarded([&] {
        require(csv && column, "null pointer argument");
        densum::CiOptions o;
        o.column = column;
        o.alpha = alpha;
        o.method = to_method(method);
        if (range && *range) o.range = densum::parse_range_option(range);
        const densum::CiReport r = densum::run_ci(csv, o);
        emit(out, format == DENSUM_FORMAT_JSON ? densum::ci_to_json(r) : densum::ci_to_text(r));
    });
}

densum_status densum_analyze_fit(const char* csv, const densum_fit_options* options, densum_format format,
                                 densum_string** out) {
    return guarded([&] {
        require(csv != nullptr, "null pointer argument");
        const densum::AnalysisReport r = densum::run_fit(csv, to_fit_options(options));
        emit(out, format == DENSUM_FORMAT_JSON ? densum::report_to_json(r) : densum::report_to_text(r));
    });
}

densum_status densum_analyze_diagnose(const char* csv, const char* column, const densum_fit_options* fit,
                                      const char* coefficient, size_t histogram_bins, densum_format format,
                                      densum_string** out) {
    return guarded([&] {
        require(csv != nullptr, "null pointer argument");
        densum::DiagnoseOptions o;
        o.column = text_or_empty(column);
        if (o.column.empty()) {
            o.fit = to_fit_options(fit);
            o.coefficient = text_or_empty(coefficient);
        }
        o.histogram_bins = histogram_bins;
        const densum::DiagnoseReport r = densum::run_diagnose(csv, o);
        switch (format) {
            case DENSUM_FORMAT_JSON: emit(out, densum::diagnose_to_json(r)); break;
            case DENSUM_FORMAT_CSV: emit(out, densum::diagnose_plot_csv(r)); break;
            default: emit(out, densum::diagnose_to_text(r)); break;
        }
    });
}

densum_status densum_report_normalize(const char* json, densum_string** out) {
    return guarded([&] {
        require(json != nullptr, "null pointer argument");
        emit(out, densum::report_to_json(densum::report_from_json(json)));
    });
}

densum_status densum_climate_normalize(const char* text, densum_source source, densum_string** out) {
    return guarded([&] {
        require(text != nullptr, "null pointer argument");
        std::vector<densum::MonthlyValue> v;
        switch (source) {
            case DENSUM_SOURCE_GISTEMP: v = densum::normalize_gistemp(text); break;
            case DENSUM_SOURCE_NOAA_CO2: v = densum::normalize_co2(text); break;
            case DENSUM_SOURCE_MONTHLY: v = densum::parse_monthly_csv(text); break;
            default: throw std::invalid_argument("unknown source");
        }
        emit(out, densum::monthly_csv(v));
    });
}

densum_status densum_climate_merge(const char* temp_csv, const char* co2_csv, const char* index_csv,
                                   densum_string** out) {
    return guarded([&] {
        require(temp_csv && co2_csv, "null pointer argument");
        const auto temp = densum::parse_monthly_csv(temp_csv);
        const auto co2 = densum::parse_monthly_csv(co2_csv);
        std::vector<densum::MonthlyValue> index;
        if (index_csv) index = densum::parse_monthly_csv(index_csv);
        emit(out, densum::climate_csv(densum::climate_merge(temp, co2, index_csv ? &index : nullptr)));
    });
}

densum_status densum_climate_prepare(const char* climate_csv, densum_unit unit, densum_string** out) {
    return guarded([&] {
        require(climate_csv != nullptr, "null pointer argument");
        const auto rows = densum::parse_climate_csv(climate_csv);
        const auto u = unit == DENSUM_UNIT_YEARLY ? densum::ClimateUnit::yearly : densum::ClimateUnit::monthly;
        emit(out, densum::model_frame_csv(densum::climate_prepare(rows, u)));
    });
}

}  // extern "C"
