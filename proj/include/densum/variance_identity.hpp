#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "densum/core_model.hpp"

namespace densum {

/// Variance of the p statistics w Y, split into the independence part and
/// the dependence inflation.
struct VarianceDecomposition {
    Matrix naive;      ///< w V w^T with V = diag(sigma^2)
    Matrix inflation;  ///< G = 1 + mu * phi, per cell
    Matrix avg_cov;    ///< C, the average nonzero covariance per row pair
    Matrix phi;        ///< average correlation per row pair
    Matrix gamma;      ///< (n^-1 w V w^T)^-1 C
    Matrix total;
    double mu = 0.0;
    std::size_t n = 0;
};

/// Strong wrappers selecting how the dependence is summarized per row pair.
struct AverageCovariance {
    Matrix values;
};
struct AverageCorrelation {
    Matrix values;
};

/// Exact variance from sigma-bar: total = naive + n mu C.
/// Throws std::invalid_argument for negative variances or shape mismatch and
/// std::domain_error when a diagonal cell implies a negative variance.
[[nodiscard]] VarianceDecomposition additive_variance(const WeightMatrix& w, std::span<const double> variances,
                                                      double mu, const AverageCovariance& c);
/// Exact variance from phi: total = naive * (1 + mu phi).
[[nodiscard]] VarianceDecomposition additive_variance(const WeightMatrix& w, std::span<const double> variances,
                                                      double mu, const AverageCorrelation& phi);

enum class SummaryRoute { sigma_bar, phi };

/// Single-statistic form driven by a DependencySummary.
[[nodiscard]] VarianceDecomposition additive_variance(std::span<const double> w, std::span<const double> variances,
                                                      const DependencySummary& dep,
                                                      SummaryRoute route = SummaryRoute::sigma_bar);

/// Dependency graph and row-pair summaries extracted from a full covariance.
struct RowPairDependency {
    double mu = 0.0;
    std::size_t edges = 0;              ///< |L|, undirected
    std::vector<std::size_t> degrees;   ///< d(i)
    Matrix sigma_bar;                   ///< p x p
    Matrix phi;                         ///< p x p
};

/// Nonzero threshold for graph extraction, relative to max |sigma_ij|.
inline constexpr double kEdgeTolerance = 1e-12;

[[nodiscard]] RowPairDependency row_pair_summaries(const Matrix& cov, const WeightMatrix& w);
[[nodiscard]] DependencySummary summaries_from_covariance(const Matrix& cov, std::span<const double> w);

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
    [[nodiscard]] bool contains(double x, double tol = 0.0) const noexcept {
        return x >= lower - tol && x <= upper + tol;
    }
};

/// [-1/mu, (n-1)/mu]. Throws std::domain_error for mu <= 0.
[[nodiscard]] Interval phi_bounds(double mu, std::size_t n);

/// Checks phi against phi_bounds. The bounds are established for unweighted
/// sums, so unequal weights raise std::domain_error.
[[nodiscard]] bool phi_within_bounds(const DependencySummary& dep, std::size_t n, std::span<const double> w,
                                     double tol = 1e-12);

struct EtaBound {
    double eta = 0.0;     ///< max sigma^2 / mean sigma^2
    double factor = 0.0;  ///< 1 + mu eta
    double bound = 0.0;   ///< (1 + mu eta) * sum sigma^2
};

[[nodiscard]] EtaBound eta_bound(std::span<const double> variances, double mu);

struct ClusterVarianceSummary {
    std::vector<Matrix> cluster_variances;  ///< Var(T_k), q x q each
    double mu_t = 0.0;
    Matrix sigma_bar_t;
    Matrix phi_t;
    Matrix total;
};

/// total = sum_k Var(T_k) + K mu_T sigma_bar_T.
[[nodiscard]] ClusterVarianceSummary cluster_variance_identity(std::vector<Matrix> cluster_variances, double mu_t,
                                                               const Matrix& sigma_bar_t);

/// Cluster totals T_k = sum_{i in k} w_{.,i} Y_i and their directed
/// dependency graph (|E| = K mu_T) extracted from a full covariance.
[[nodiscard]] ClusterVarianceSummary cluster_summaries_from_covariance(const Matrix& cov, const WeightMatrix& w,
                                                                       const Partition& partition);

}  // namespace densum
