#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "densum/core_model.hpp"

namespace densum {

/// Least-squares fit with explicit weight rows, B = W y.
struct RegressionFit {
    Matrix design;        ///< n x p
    Vector y;
    Vector coefficients;  ///< B
    Matrix weight_rows;   ///< W = (X^T X)^-1 X^T, p x n
    Vector residuals;
    Vector fitted;

    [[nodiscard]] std::size_t n() const noexcept { return static_cast<std::size_t>(design.rows()); }
    [[nodiscard]] std::size_t p() const noexcept { return static_cast<std::size_t>(design.cols()); }
    /// W_{s,i} e_i for row s.
    [[nodiscard]] Vector weighted_residuals(std::size_t s) const;
};

/// Factorizes a fixed design once (Householder QR) so repeated fits reuse W.
/// Throws RankDeficientError naming the first column that lies in the span
/// of the preceding ones (|R_jj| <= 1e-10 ||X||_F).
class OlsProjector {
public:
    explicit OlsProjector(Matrix design, std::vector<std::string> column_names = {});

    [[nodiscard]] const Matrix& design() const noexcept { return design_; }
    [[nodiscard]] const Matrix& weight_rows() const noexcept { return weights_; }
    [[nodiscard]] RegressionFit fit(std::span<const double> y) const;

private:
    Matrix design_;
    Matrix weights_;
};

[[nodiscard]] RegressionFit ols_fit(const Matrix& x, std::span<const double> y,
                                    std::vector<std::string> column_names = {});

/// sum_i W_{s,i} W_{t,i} e_i^2.
[[nodiscard]] double meat_estimator(const RegressionFit& fit, std::size_t s, std::size_t t);
[[nodiscard]] double meat_estimator(std::span<const double> ws, std::span<const double> wt,
                                    std::span<const double> residuals);

struct ClusterVarianceEstimate {
    double value = 0.0;
    std::vector<double> contributions;  ///< (sum_{j in k} W_{s,j} e_j)^2 per cluster
    Partition partition;
};

/// C_s = sum_k (sum_{j in k} W_{s,j} e_j)^2.
[[nodiscard]] ClusterVarianceEstimate cluster_robust(const RegressionFit& fit, const Partition& partition,
                                                     std::size_t s);
[[nodiscard]] ClusterVarianceEstimate cluster_robust(std::span<const double> weighted_residuals,
                                                     const Partition& partition);

struct PartitionComparison {
    std::vector<double> values;
    Matrix differences;                                   ///< values[a] - values[b]
    std::vector<std::size_t> ranking;                     ///< descending, stable
    std::size_t recommended = 0;                          ///< argmax, first on ties
    std::vector<std::pair<std::size_t, std::size_t>> ties;
};

/// Differences within `tie_tolerance` (relative to the largest value) are ties.
[[nodiscard]] PartitionComparison partition_compare(const RegressionFit& fit,
                                                    const std::vector<Partition>& partitions, std::size_t s,
                                                    double tie_tolerance = 1e-12);
[[nodiscard]] PartitionComparison partition_compare(std::span<const double> weighted_residuals,
                                                    const std::vector<Partition>& partitions,
                                                    double tie_tolerance = 1e-12);

struct ResidualRange {
    double value = 0.0;
    bool degenerate = false;  ///< all weighted residuals equal
    std::string warning;
};

/// max_i W_{s,i} e_i - min_i W_{s,i} e_i.
[[nodiscard]] ResidualRange residual_range(const RegressionFit& fit, std::size_t s);
[[nodiscard]] ResidualRange residual_range(std::span<const double> weighted_residuals);

enum class Link { identity, logit, log };

struct IrwlsFit {
    Vector coefficients;
    Matrix weight_rows;        ///< (X^T Omega X)^-1 X^T Omega at convergence
    Vector working_weights;    ///< diag(Omega)
    Vector fitted;             ///< mean scale
    Vector residuals;          ///< y - fitted
    std::vector<Vector> trace; ///< beta_1, beta_2, ...
    int iterations = 0;
    Link link = Link::identity;
};

/// Stops when max |beta_t - beta_{t-1}| < tol. Throws ConvergenceError after
/// max_iter updates and std::domain_error on logit separation.
[[nodiscard]] IrwlsFit irwls_fit(const Matrix& x, std::span<const double> y, Link link, double tol = 1e-10,
                                 int max_iter = 100);

struct GeeOptions {
    int max_iter = 25;
    double tol = 1e-8;
};

struct GeeFit {
    Vector coefficients;
    Matrix robust_covariance;  ///< sandwich, no small-sample correction
    double rho = 0.0;          ///< exchangeable working correlation
    int iterations = 0;
};

/// Gaussian identity-link GEE with exchangeable working correlation.
/// Throws std::invalid_argument when the partition has a single cluster.
[[nodiscard]] GeeFit gee_exchangeable(const Matrix& x, std::span<const double> y, const Partition& partition,
                                      const GeeOptions& options = {});

/// B_s +- z_{1-alpha/2} SE_s from the GEE sandwich.
[[nodiscard]] ConfidenceSet gee_exchangeable_wald(const Matrix& x, std::span<const double> y,
                                                  const Partition& partition, double alpha, std::size_t s,
                                                  const GeeOptions& options = {});

struct AcfResult {
    std::vector<double> r;  ///< r_1..r_L
    double phi_hat = 0.0;   ///< simple mean of r_l
    std::size_t lags = 0;
};

[[nodiscard]] AcfResult acf_phi_hat(std::span<const double> series, std::size_t lags);

/// (floor(10 log10 n), floor((n-1)/2)), each capped at n-1.
[[nodiscard]] std::pair<std::size_t, std::size_t> acf_lag_windows(std::size_t n);

}  // namespace densum
