#ifndef DENSUM_DENSUM_H
#define DENSUM_DENSUM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DENSUM_BUILDING_LIBRARY)
#    define DENSUM_API __declspec(dllexport)
#  else
#    define DENSUM_API __declspec(dllimport)
#  endif
#else
#  define DENSUM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum densum_status {
    DENSUM_OK = 0,
    DENSUM_E_INVALID_ARGUMENT = 1,
    DENSUM_E_DOMAIN = 2,
    DENSUM_E_PARSE = 3,
    DENSUM_E_RANK_DEFICIENT = 4,
    DENSUM_E_CONVERGENCE = 5,
    DENSUM_E_NOT_POSITIVE_DEFINITE = 6,
    DENSUM_E_INTERNAL = 99
} densum_status;

typedef enum densum_method {
    DENSUM_METHOD_HOEFFDING = 0,
    DENSUM_METHOD_U_SHARP = 1,
    DENSUM_METHOD_BERNSTEIN = 2,
    DENSUM_METHOD_WALD = 3,
    DENSUM_METHOD_HOEFFDING_RATIO = 4
} densum_method;

typedef enum densum_format {
    DENSUM_FORMAT_TEXT = 0,
    DENSUM_FORMAT_JSON = 1,
    DENSUM_FORMAT_CSV = 2
} densum_format;

typedef enum densum_source {
    DENSUM_SOURCE_GISTEMP = 0,
    DENSUM_SOURCE_NOAA_CO2 = 1,
    DENSUM_SOURCE_MONTHLY = 2
} densum_source;

typedef enum densum_unit {
    DENSUM_UNIT_MONTHLY = 0,
    DENSUM_UNIT_YEARLY = 1
} densum_unit;

/* Message of the last failure on the calling thread; empty after success. */
DENSUM_API const char* densum_last_error(void);
/* Source line of the last parse failure on the calling thread, 0 if none. */
DENSUM_API size_t densum_last_error_line(void);
DENSUM_API const char* densum_version(void);

/* Owned, NUL-terminated result text. */
typedef struct densum_string densum_string;
DENSUM_API const char* densum_string_data(const densum_string* s);
DENSUM_API size_t densum_string_size(const densum_string* s);
DENSUM_API void densum_string_free(densum_string* s);

/* ------------------------------------------------------------ scalars */

DENSUM_API densum_status densum_phi_bounds(double mu, size_t n, double* lower, double* upper);
DENSUM_API densum_status densum_u_multiplier(double alpha, double* out);
DENSUM_API densum_status densum_ci_mean(const double* y, size_t n, double range, double alpha,
                                        densum_method method, double* lower, double* upper);

/* cov is n x n row-major; w has n entries. */
DENSUM_API densum_status densum_variance_identity(const double* cov, const double* w, size_t n, double* naive,
                                                  double* total, double* mu, double* phi);

/* -------------------------------------------------------------- fits */

typedef struct densum_fit densum_fit;

/* x is n x p row-major. */
DENSUM_API densum_status densum_fit_ols(const double* x, size_t n, size_t p, const double* y, densum_fit** out);
DENSUM_API void densum_fit_free(densum_fit* fit);
DENSUM_API size_t densum_fit_n(const densum_fit* fit);
DENSUM_API size_t densum_fit_p(const densum_fit* fit);
DENSUM_API densum_status densum_fit_coefficients(const densum_fit* fit, double* out, size_t p);
DENSUM_API densum_status densum_fit_residuals(const densum_fit* fit, double* out, size_t n);
/* Residual-range interval B_s +- sqrt(n) R_s c for coefficient s. */
DENSUM_API densum_status densum_fit_ci(const densum_fit* fit, size_t s, double alpha, double* lower, double* upper,
                                       double* range);
/* assignment holds a 0-based cluster id per observation. */
DENSUM_API densum_status densum_fit_cluster_variance(const densum_fit* fit, const size_t* assignment, size_t n,
                                                     size_t s, double* out);

/* -------------------------------------------------------- simulation */

typedef struct densum_config densum_config;
typedef void (*densum_progress_fn)(const char* csv_row, void* user);

DENSUM_API densum_status densum_config_new(int table, densum_config** out);
DENSUM_API void densum_config_free(densum_config* config);
/* Keys as in a [tableN] config section: n, phi, alpha_shape, reps, seed, ... */
DENSUM_API densum_status densum_config_set(densum_config* config, const char* key, const char* value);
/* Applies [analysis] and [tableN] of an INI-style text for the handle's table. */
DENSUM_API densum_status densum_config_load(densum_config* config, const char* text);
DENSUM_API densum_status densum_config_validate(const densum_config* config);

/* Runs the table; each finished row is passed to progress (may be NULL) as a
   CSV line. The full version-stamped CSV is returned in csv_out. */
DENSUM_API densum_status densum_simulate(const densum_config* config, densum_progress_fn progress, void* user,
                                         densum_string** csv_out);

/* ---------------------------------------------------------- analyses */

typedef struct densum_fit_options {
    const char* response;
    const char* const* covariates;
    size_t n_covariates;
    int intercept;
    double alpha;
    const char* range; /* known=R | residual | two-mean | marginal=R; NULL: residual */
    const char* const* partitions;
    size_t n_partitions;
    const char* focus; /* NULL or empty: no retention screen */
    uint64_t seed;
} densum_fit_options;

DENSUM_API densum_status densum_analyze_ci(const char* csv, const char* column, densum_method method,
                                           const char* range, double alpha, densum_format format,
                                           densum_string** out);
DENSUM_API densum_status densum_analyze_fit(const char* csv, const densum_fit_options* options,
                                            densum_format format, densum_string** out);
/* Exactly one of column and coefficient is used: a non-empty column diagnoses
   that column, otherwise the weighted residuals of coefficient in the fit. */
DENSUM_API densum_status densum_analyze_diagnose(const char* csv, const char* column,
                                                 const densum_fit_options* fit, const char* coefficient,
                                                 size_t histogram_bins, densum_format format, densum_string** out);
/* Re-serializes an analysis report JSON; fails if it does not parse. */
DENSUM_API densum_status densum_report_normalize(const char* json, densum_string** out);

/* ----------------------------------------------------------- climate */

/* Upstream text to a date,value monthly CSV. */
DENSUM_API densum_status densum_climate_normalize(const char* text, densum_source source, densum_string** out);
/* Monthly CSVs (date,value) to a date,temp,co2[,index] CSV; index may be NULL. */
DENSUM_API densum_status densum_climate_merge(const char* temp_csv, const char* co2_csv, const char* index_csv,
                                              densum_string** out);
/* Climate CSV to a lagged model frame CSV. */
DENSUM_API densum_status densum_climate_prepare(const char* climate_csv, densum_unit unit, densum_string** out);

#ifdef __cplusplus
}
#endif

#endif
