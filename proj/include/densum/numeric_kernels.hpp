#pragma once

#include <cstdint>

#include "densum/core_model.hpp"

namespace densum {

// Special functions and quantiles. Absolute error targets are 1e-10 on the
// forward functions and 1e-10 on quantiles away from the extreme tails.

[[nodiscard]] double std_normal_cdf(double x) noexcept;
/// Upper tail 1 - Phi(x) without cancellation.
[[nodiscard]] double std_normal_sf(double x) noexcept;
[[nodiscard]] double std_normal_pdf(double x) noexcept;
/// Throws std::domain_error for p outside (0, 1).
[[nodiscard]] double std_normal_quantile(double p);

[[nodiscard]] double log_beta(double a, double b);
/// Regularized incomplete beta I_x(a, b).
[[nodiscard]] double incomplete_beta(double a, double b, double x);
[[nodiscard]] double beta_pdf(double a, double b, double x);
[[nodiscard]] double beta_quantile(double a, double b, double p);

[[nodiscard]] double truncnorm_cdf(double mu, double sigma, double lo, double hi, double x);
[[nodiscard]] double truncnorm_quantile(double mu, double sigma, double lo, double hi, double p);
/// Mean and variance of N(mu, sigma^2) restricted to [lo, hi].
[[nodiscard]] double truncnorm_mean(double mu, double sigma, double lo, double hi);
[[nodiscard]] double truncnorm_variance(double mu, double sigma, double lo, double hi);

/// Symmetric, unit-diagonal matrix. Positive semidefiniteness is not checked
/// here; `cholesky` and `ensure_pd` handle that.
class CorrelationMatrix {
public:
    explicit CorrelationMatrix(Matrix m);

    [[nodiscard]] const Matrix& matrix() const noexcept { return m_; }
    [[nodiscard]] Eigen::Index size() const noexcept { return m_.rows(); }

private:
    Matrix m_;
};

/// Lower factor L with L L^T = A. Throws NotPositiveDefiniteError.
[[nodiscard]] Matrix cholesky(const Matrix& a);
[[nodiscard]] Matrix cholesky(const CorrelationMatrix& a);

/// Factor of a positive semidefinite matrix: pivots within `tol` of zero
/// yield a zero column instead of failing. Throws on clearly negative pivots.
[[nodiscard]] Matrix cholesky_semidefinite(const Matrix& a, double tol = 1e-10);

struct PdRepair {
    CorrelationMatrix matrix;
    double lambda = 0.0;
    bool repaired = false;
};

/// Shrinks toward the identity, A' = (1 - lambda) A + lambda I, using the
/// smallest lambda in {0, 1e-6, 1e-5, ..., 1e-1, 1} for which Cholesky succeeds.
[[nodiscard]] PdRepair ensure_pd(const Matrix& a);

/// Counter-based stream: draw k of stream (seed, index) is a pure function of
/// (seed, index, k), so streams can be consumed in any order on any thread.
class SeededStream {
public:
    SeededStream(std::uint64_t master_seed, std::uint64_t stream_index) noexcept;

    [[nodiscard]] std::uint64_t next_u64() noexcept;
    /// Uniform on the open interval (0, 1).
    [[nodiscard]] double next_uniform() noexcept;
    [[nodiscard]] double next_normal();
    [[nodiscard]] std::uint64_t position() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t gamma_;
    std::uint64_t counter_ = 0;
};

[[nodiscard]] SeededStream seeded_stream(std::uint64_t master_seed, std::uint64_t stream_index) noexcept;

}  // namespace densum
