#pragma once

#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "densum/core_model.hpp"

namespace densum {

enum class Theorem { hoeffding, u_sharp, bernstein_h, bernstein_simple };

struct TailBound {
    double tau = 0.0;
    double value = 1.0;  ///< capped at 1
    Theorem theorem = Theorem::hoeffding;
};

/// Sum of w_i^2 R_i^2; `r` may hold one shared range.
[[nodiscard]] double sum_w2r2(std::span<const double> w, std::span<const double> r);

/// min(1, 2 exp(-2 tau^2 / sum w^2 R^2)).
[[nodiscard]] TailBound hoeffding_tail(double tau, std::span<const double> w, std::span<const double> r);
[[nodiscard]] TailBound hoeffding_tail(double tau, double sum_w2r2);
/// min(1, 2 exp(-6 tau^2 / sum w^2 R^2)), for symmetric regular U errors.
[[nodiscard]] TailBound u_tail(double tau, std::span<const double> w, std::span<const double> r);
[[nodiscard]] TailBound u_tail(double tau, double sum_w2r2);

enum class BernsteinForm { h, simple };

/// h(u) = (u + 1) log(u + 1) - u.
[[nodiscard]] double bernstein_h(double u);

/// Equal weights w, |e_i| <= M, `av_z2[i]` = Av(e_i^2).
[[nodiscard]] TailBound bernstein_tail(double tau, double w, double m, std::span<const double> av_z2,
                                       BernsteinForm form);

/// Intervals for a mean of n values with range R.
/// Throws std::domain_error for the ratio form when n <= 2 log(2/alpha).
[[nodiscard]] ConfidenceSet ci_mean(const SampleSummary& summary, double r, double alpha, Method method,
                                    bool nonneg_m = false);

/// Range inputs for ci_linear.
struct KnownRanges {
    std::vector<double> ranges;  ///< one per observation, or one shared value
};
struct MarginalRange {
    double range = 0.0;  ///< half-width uses R sqrt(sum w^2)
};
struct TwoMeanRange {
    std::vector<double> fitted_means;  ///< R_i = 2 E Y_i, nonnegative outcomes
};
/// Weighted residual range: half-width sqrt(n) * R_hat_s.
struct WeightedResidualRange {
    double weighted_range = 0.0;
};
/// Raw residual range standing in for a common R: R_hat sqrt(sum w^2).
struct ResidualSampleRange {
    double residual_range = 0.0;
};

using RangeSpec =
    std::variant<KnownRanges, MarginalRange, TwoMeanRange, WeightedResidualRange, ResidualSampleRange>;

/// sqrt(log(2/alpha) / 6), the Theorem 3 multiplier.
[[nodiscard]] double u_multiplier(double alpha);

/// B_s +- sqrt(sum w^2 R^2) sqrt(log(2/alpha)/6) with R resolved from `ranges`.
[[nodiscard]] ConfidenceSet ci_linear(double estimate, std::span<const double> w, const RangeSpec& ranges,
                                      double alpha);

/// Minimizing s: 4 tau / S (hoeffding) or 12 tau / S (u_sharp), S = sum w^2 R^2.
[[nodiscard]] double optimal_s(double tau, double sum_w2r2, Theorem theorem);
/// 6 {M^2 c* sum w^2}^-1/2 sqrt(log(2/alpha)/6).
[[nodiscard]] double optimal_s_simulation(double m, double c_star, double sum_w2, double alpha);

/// Bound on mu*phi: sum w^2 R^2 / (12 sum w^2 sigma^2) - 1. Spans of size 1 broadcast.
[[nodiscard]] double rule_of_thumb(std::span<const double> w, std::span<const double> variances,
                                   std::span<const double> r);

enum class A5Verdict { holds, violated, boundary };

struct A5Report {
    double s_used = 0.0;
    double a_hat = 1.0;
    double a_hat_se = 0.0;
    double av_star = 1.0;
    double log_a_hat = 0.0;
    double log_av_star = 0.0;
    A5Verdict verdict = A5Verdict::boundary;
};

[[nodiscard]] std::string_view to_string(A5Verdict v) noexcept;

/// Compares max(N^-1 sum exp{s p_r}, N^-1 sum exp{-s p_r}) over projections
/// p_r = w . e_r with Av*; |A_hat - Av*| within one standard error is a boundary.
[[nodiscard]] A5Report a5_from_projections(std::span<const double> projections, double s, double log_av_star);

/// `draws` is reps x n; `m` holds one shared bound or one per column.
[[nodiscard]] A5Report a5_empirical(const Matrix& draws, std::span<const double> w, double s,
                                    std::span<const double> m);

}  // namespace densum
