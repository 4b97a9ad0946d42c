#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "densum/concentration.hpp"
#include "densum/core_model.hpp"
#include "densum/numeric_kernels.hpp"

namespace densum {

/// Bounded marginal family for copula sampling.
class MarginalSpec {
public:
    enum class Family { beta, truncnormal, uniform };

    [[nodiscard]] static MarginalSpec beta(double a, double b);
    [[nodiscard]] static MarginalSpec truncnormal(double mu, double sigma, double lo, double hi);
    [[nodiscard]] static MarginalSpec uniform(double lo, double hi);

    [[nodiscard]] Family family() const noexcept { return family_; }
    [[nodiscard]] double quantile(double u) const;
    [[nodiscard]] double mean() const;
    [[nodiscard]] double variance() const;
    [[nodiscard]] SupportSpec support() const;
    [[nodiscard]] std::string describe() const;

private:
    MarginalSpec(Family f, double p0, double p1, double lo, double hi) : family_(f), p0_(p0), p1_(p1), lo_(lo), hi_(hi) {}

    Family family_;
    double p0_, p1_;  // (a, b) or (mu, sigma)
    double lo_, hi_;
};

/// Draws rows marginal-quantile(Phi(L z_r)) with z_r from stream (seed, first_row + r).
class CopulaSampler {
public:
    CopulaSampler(const CorrelationMatrix& corr, MarginalSpec marginal, std::uint64_t seed);

    [[nodiscard]] std::size_t dimension() const noexcept { return static_cast<std::size_t>(factor_.rows()); }
    /// Fills `out` (length n) with replication `r`; `z` is scratch of length n.
    void draw(std::uint64_t r, Eigen::Ref<Vector> out, Vector& z) const;

private:
    Matrix factor_;
    MarginalSpec marginal_;
    std::uint64_t seed_;
};

/// reps x n outcome matrix. Throws std::invalid_argument when n != corr size.
[[nodiscard]] Matrix copula_sample(const CorrelationMatrix& corr, const MarginalSpec& marginal, std::size_t n,
                                   std::size_t reps, std::uint64_t seed);

/// Unit diagonal, constant off-diagonal rho; needs -1/(n-1) < rho < 1.
[[nodiscard]] CorrelationMatrix exchangeable_corr(std::size_t n, double rho);

struct Table3Correlation {
    CorrelationMatrix matrix;
    double lambda = 0.0;       ///< PD repair shrinkage
    std::size_t clipped = 0;   ///< off-diagonal cells clipped to +-0.999
};

/// Off-diagonal (i, j) = sigma^-2 phi* n^2 w1_i w1_j clipped to [-0.999, 0.999], then ensure_pd.
[[nodiscard]] Table3Correlation table3_corr(double phi_star, std::span<const double> w1, double sigma, std::size_t n);

struct CoverageReport {
    int table = 1;
    std::size_t n = 0;
    double phi = 0.0;          ///< phi (tables 1, 2) or phi* (table 3)
    double alpha_shape = 0.0;  ///< Beta shape; 0 for table 3
    int coefficient = -1;      ///< -1 for the mean, else coefficient index
    double threshold = 0.0;    ///< rule of thumb / (n - 1)
    double mean_lower = 0.0;   ///< mean CI_U endpoints
    double mean_upper = 0.0;
    double ci_wald = 0.0;
    double ci_u = 0.0;
    double ci_r = -1.0;        ///< negative when not computed
    A5Report a5;
    std::uint64_t seed = 0;
    double repair_lambda = 0.0;
    std::size_t reps = 0;
};

struct ExperimentConfig {
    int table = 1;
    std::vector<std::size_t> n_values;   ///< empty: the table's grid
    std::vector<double> phi_values;      ///< phi or phi*; empty: the table's grid
    std::vector<double> alpha_shapes;    ///< table 2; empty: {10, 25, 50, 100}
    double beta_shape = 10.0;            ///< table 1 marginal Beta(a, a)
    std::size_t reps = 2000;
    double alpha = 0.05;
    double c_star = 0.0;                 ///< 0: 10 for tables 1-2, 5 for table 3
    std::uint64_t seed = 20240601;
    std::size_t cluster_size = 10;       ///< K = n / cluster_size sequential clusters
    unsigned threads = 0;                ///< 0: hardware concurrency
    std::function<void(const CoverageReport&)> on_row;

    /// Throws std::invalid_argument describing the first invalid field.
    void validate() const;
};

[[nodiscard]] std::vector<CoverageReport> run_table1(const ExperimentConfig& config);
[[nodiscard]] std::vector<CoverageReport> run_table2(const ExperimentConfig& config);
[[nodiscard]] std::vector<CoverageReport> run_table3(const ExperimentConfig& config);
[[nodiscard]] std::vector<CoverageReport> run_experiment(const ExperimentConfig& config);

/// The design column t of Table 3, a fixed truncnormal(1, 1, -5, 5) draw per (n, seed).
[[nodiscard]] Vector table3_design_draw(std::size_t n, std::uint64_t seed);

/// Default phi grid of table 1 or phi* grid of table 3 for a given n.
[[nodiscard]] std::vector<double> default_phi_grid(int table, std::size_t n);

}  // namespace densum
