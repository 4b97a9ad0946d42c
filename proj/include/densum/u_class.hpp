#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "densum/core_model.hpp"

namespace densum {

/// Functional average Av(Z^k) over a continuous interval support.
[[nodiscard]] double av_moment(const SupportSpec& support, int k);

/// Av(exp{s w Z}) for Z on [-M, M]: sinh(x)/x with x = s w M.
[[nodiscard]] double av_exp(double s, double w, double m);
/// log(sinh(x)/x), stable for large |x|.
[[nodiscard]] double log_sinhc(double x);
[[nodiscard]] double sinhc(double x);

/// Av* = prod_i av_exp(s, w_i, M_i).
[[nodiscard]] double av_product(double s, std::span<const double> w, std::span<const double> m);
[[nodiscard]] double log_av_product(double s, std::span<const double> w, std::span<const double> m);

/// Av(exp{sZ}) over an arbitrary interval support.
[[nodiscard]] double av_exp_interval(double s, const SupportSpec& support);

/// exp(s^2 w^2 R^2 / 24).
[[nodiscard]] double u_mgf_bound(double s, double w, double r);
/// exp(s av + s^2 R^2 / 8).
[[nodiscard]] double hoeffding_av_bound(double s, const SupportSpec& support, double av);
/// exp(M^-2 av_z2 (e^{sM} - 1 - sM)).
[[nodiscard]] double bernstein_av_bound(double s, double m, double av_z2);
/// (2M)^-1 (2M + 1) (av - (2M + 1)^-1) for integer supports {-M, ..., M}.
[[nodiscard]] double discrete_mgf_adjustment(double av_exp_value, int m);

struct UDiagnosticsReport {
    double expected_value = 0.0;
    double functional_average = 0.0;
    double midpoint = 0.0;
    bool is_regular = true;
    bool is_u = false;
    bool is_sub_u = false;
    double cdf_area_gap = 0.0;  ///< int F - int S over the support
    double tolerance = 0.0;
    bool support_estimated = false;

    friend bool operator==(const UDiagnosticsReport&, const UDiagnosticsReport&) = default;
};

/// Analytic check: |E - (M+m)/2| <= 1e-3 R.
[[nodiscard]] UDiagnosticsReport check_u_class(double expected_value, const SupportSpec& support);
/// Empirical check with tolerance 3 standard errors of the mean. Without a
/// support the sample extremes stand in for it.
[[nodiscard]] UDiagnosticsReport check_u_class(const Sample& sample,
                                               const std::optional<SupportSpec>& support = std::nullopt);

struct MomentCheck {
    int k = 0;
    double bound = 0.0;
    double value = 0.0;
    bool pass = false;
};

/// `moments[k-1]` holds E Z^k of a centered variable.
[[nodiscard]] std::vector<MomentCheck> moment_condition_check(std::span<const double> moments, double r);

struct IdentityCheck {
    double lhs = 0.0;  ///< Av
    double rhs = 0.0;  ///< E + R^-1 Cov(., 1/f)
    double gap = 0.0;
};

/// Finite pmf with strictly positive mass on each listed point.
[[nodiscard]] IdentityCheck eq1_identity_check(std::span<const double> support, std::span<const double> pmf);

/// Joint pmf on a product grid; `probabilities` is row-major with the last
/// axis fastest. Zero cells lie outside the support.
struct JointPmf {
    std::vector<std::vector<double>> axes;
    std::vector<double> probabilities;
};

inline constexpr std::size_t kMaxJointSupport = 1'000'000;

[[nodiscard]] IdentityCheck eq2_identity_check(const JointPmf& joint,
                                               const std::function<double(std::span<const double>)>& g);

}  // namespace densum
