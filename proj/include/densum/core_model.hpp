#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "densum/errors.hpp"

namespace densum {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Observed outcomes. Nonempty and finite.
class Sample {
public:
    explicit Sample(std::vector<double> values);

    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

private:
    std::vector<double> values_;
};

/// p x n weights; row s holds w_{s,i}. Finite, no all-zero rows.
class WeightMatrix {
public:
    explicit WeightMatrix(Matrix entries);
    /// Single-row convenience.
    explicit WeightMatrix(std::span<const double> row);

    [[nodiscard]] const Matrix& entries() const noexcept { return entries_; }
    [[nodiscard]] Eigen::Index rows() const noexcept { return entries_.rows(); }
    [[nodiscard]] Eigen::Index cols() const noexcept { return entries_.cols(); }

private:
    Matrix entries_;
};

/// Throws std::invalid_argument on a non-finite entry or a "degenerate weight row".
[[nodiscard]] WeightMatrix validate_weights(const Matrix& w);

enum class Continuity { continuous, discrete_integer };

/// Support [lower, upper]. For discrete-integer supports the range is the
/// counting measure of {lower, ..., upper}.
class SupportSpec {
public:
    SupportSpec(double lower, double upper, Continuity continuity = Continuity::continuous);

    [[nodiscard]] double lower() const noexcept { return lower_; }
    [[nodiscard]] double upper() const noexcept { return upper_; }
    [[nodiscard]] Continuity continuity() const noexcept { return continuity_; }
    [[nodiscard]] double range() const noexcept;
    [[nodiscard]] double midpoint() const noexcept { return 0.5 * (lower_ + upper_); }
    [[nodiscard]] bool symmetric() const noexcept { return lower_ == -upper_; }

private:
    double lower_;
    double upper_;
    Continuity continuity_;
};

enum class GraphKind { linear, dependency };

struct DependencySummary {
    double mu = 0.0;
    double phi = 0.0;
    double sigma_bar = 0.0;
    GraphKind graph_kind = GraphKind::linear;

    /// 1 + mu*phi >= 0 and mu >= 0.
    [[nodiscard]] bool consistent() const noexcept;
};

/// Assignment of n observations to K clusters, stored 0-based.
class Partition {
public:
    /// `assignment[i]` is the 0-based cluster of observation i. Cluster ids
    /// must cover 0..K-1 with no empty cluster.
    explicit Partition(std::vector<std::size_t> assignment);

    [[nodiscard]] std::size_t size() const noexcept { return assignment_.size(); }
    [[nodiscard]] std::size_t num_clusters() const noexcept { return members_.size(); }
    [[nodiscard]] std::span<const std::size_t> assignment() const noexcept { return assignment_; }
    [[nodiscard]] const std::vector<std::vector<std::size_t>>& clusters() const noexcept { return members_; }
    [[nodiscard]] std::vector<std::size_t> cluster_sizes() const;

    friend bool operator==(const Partition& a, const Partition& b) { return a.assignment_ == b.assignment_; }

private:
    std::vector<std::size_t> assignment_;
    std::vector<std::vector<std::size_t>> members_;
};

/// Contiguous blocks: 1-based observation i goes to cluster ceil(i*K/n).
[[nodiscard]] Partition sequential_partition(std::size_t n, std::size_t k);
[[nodiscard]] Partition singleton_partition(std::size_t n);

struct SampleSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;  ///< n-1 divisor
    double min = 0.0;
    double max = 0.0;
    double range = 0.0;
};

/// Throws std::domain_error when n = 1 (variance undefined).
[[nodiscard]] SampleSummary summarize(const Sample& sample);
[[nodiscard]] SampleSummary summarize(std::span<const double> values);

enum class Method { hoeffding, u_sharp, bernstein, wald, hoeffding_ratio };
enum class RangeSource { known, residual_range, two_mean, marginal_range };

struct ConfidenceSet {
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
    Method method = Method::u_sharp;
    RangeSource range_source = RangeSource::known;

    [[nodiscard]] double half_width() const noexcept { return 0.5 * (upper - lower); }
    [[nodiscard]] double center() const noexcept { return 0.5 * (upper + lower); }
    [[nodiscard]] bool contains(double x) const noexcept { return lower <= x && x <= upper; }
};

[[nodiscard]] std::string_view to_string(Method m) noexcept;
[[nodiscard]] std::string_view to_string(RangeSource r) noexcept;
[[nodiscard]] std::string_view to_string(GraphKind g) noexcept;
[[nodiscard]] Method method_from_string(std::string_view s);
[[nodiscard]] RangeSource range_source_from_string(std::string_view s);

}  // namespace densum
