#include "densum/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace densum {

Sample::Sample(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw std::invalid_argument("sample is empty");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]))
            throw std::invalid_argument("sample value " + std::to_string(i) + " is not finite");
    }
}

namespace {

void check_weights(const Matrix& w) {
    if (w.rows() == 0 || w.cols() == 0) throw std::invalid_argument("weight matrix is empty");
    if (!w.allFinite()) throw std::invalid_argument("weight matrix has non-finite entries");
    for (Eigen::Index s = 0; s < w.rows(); ++s) {
        if ((w.row(s).array() == 0.0).all())
            throw std::invalid_argument("degenerate weight row " + std::to_string(s));
    }
}

}  // namespace

WeightMatrix::WeightMatrix(Matrix entries) : entries_(std::move(entries)) { check_weights(entries_); }

WeightMatrix::WeightMatrix(std::span<const double> row)
    : entries_(Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size()))) {
    check_weights(entries_);
}

WeightMatrix validate_weights(const Matrix& w) { return WeightMatrix(w); }

SupportSpec::SupportSpec(double lower, double upper, Continuity continuity)
    : lower_(lower), upper_(upper), continuity_(continuity) {
    if (!std::isfinite(lower) || !std::isfinite(upper)) throw std::invalid_argument("support bounds must be finite");
    if (!(lower < upper)) throw std::invalid_argument("support requires lower < upper");
    if (continuity == Continuity::discrete_integer &&
        (std::floor(lower) != lower || std::floor(upper) != upper))
        throw std::invalid_argument("discrete support bounds must be integers");
}

double SupportSpec::range() const noexcept {
    if (continuity_ == Continuity::discrete_integer) return upper_ - lower_ + 1.0;
    return upper_ - lower_;
}

bool DependencySummary::consistent() const noexcept { return mu >= 0.0 && 1.0 + mu * phi >= 0.0; }

Partition::Partition(std::vector<std::size_t> assignment) : assignment_(std::move(assignment)) {
    if (assignment_.empty()) throw std::invalid_argument("partition is empty");
    const std::size_t k = *std::max_element(assignment_.begin(), assignment_.end()) + 1;
    members_.resize(k);
    for (std::size_t i = 0; i < assignment_.size(); ++i) members_[assignment_[i]].push_back(i);
    for (std::size_t c = 0; c < k; ++c) {
        if (members_[c].empty())
            throw std::invalid_argument("partition cluster " + std::to_string(c + 1) + " is empty");
    }
}

std::vector<std::size_t> Partition::cluster_sizes() const {
    std::vector<std::size_t> sizes;
    sizes.reserve(members_.size());
    for (const auto& m : members_) sizes.push_back(m.size());
    return sizes;
}

Partition sequential_partition(std::size_t n, std::size_t k) {
    if (k == 0) throw std::invalid_argument("sequential_partition needs K >= 1");
    if (k > n) throw std::invalid_argument("sequential_partition needs K <= n");
    std::vector<std::size_t> a(n);
    for (std::size_t i = 1; i <= n; ++i) a[i - 1] = (i * k + n - 1) / n - 1;
    return Partition(std::move(a));
}

Partition singleton_partition(std::size_t n) {
    std::vector<std::size_t> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = i;
    return Partition(std::move(a));
}

SampleSummary summarize(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("sample is empty");
    if (values.size() == 1) throw std::domain_error("variance undefined for n = 1");
    SampleSummary out;
    out.n = values.size();
    // Welford keeps the variance accurate for large offsets.
    double mean = 0.0, m2 = 0.0;
    out.min = out.max = values[0];
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double x = values[i];
        if (!std::isfinite(x)) throw std::invalid_argument("sample value " + std::to_string(i) + " is not finite");
        const double d = x - mean;
        mean += d / static_cast<double>(i + 1);
        m2 += d * (x - mean);
        out.min = std::min(out.min, x);
        out.max = std::max(out.max, x);
    }
    out.mean = mean;
    out.variance = m2 / static_cast<double>(values.size() - 1);
    out.range = out.max - out.min;
    return out;
}

SampleSummary summarize(const Sample& sample) { return summarize(sample.values()); }

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::hoeffding: return "hoeffding";
        case Method::u_sharp: return "u_sharp";
        case Method::bernstein: return "bernstein";
        case Method::wald: return "wald";
        case Method::hoeffding_ratio: return "hoeffding_ratio";
    }
    return "unknown";
}

std::string_view to_string(RangeSource r) noexcept {
    switch (r) {
        case RangeSource::known: return "known";
        case RangeSource::residual_range: return "residual_range";
        case RangeSource::two_mean: return "two_mean";
        case RangeSource::marginal_range: return "marginal_range";
    }
    return "unknown";
}

std::string_view to_string(GraphKind g) noexcept {
    return g == GraphKind::linear ? "linear" : "dependency";
}

Method method_from_string(std::string_view s) {
    if (s == "hoeffding") return Method::hoeffding;
    if (s == "u" || s == "u_sharp") return Method::u_sharp;
    if (s == "bernstein") return Method::bernstein;
    if (s == "wald") return Method::wald;
    if (s == "ratio" || s == "hoeffding_ratio") return Method::hoeffding_ratio;
    throw std::invalid_argument("unknown method '" + std::string(s) + "'");
}

RangeSource range_source_from_string(std::string_view s) {
    if (s == "known") return RangeSource::known;
    if (s == "residual" || s == "residual_range") return RangeSource::residual_range;
    if (s == "two-mean" || s == "two_mean") return RangeSource::two_mean;
    if (s == "marginal" || s == "marginal_range") return RangeSource::marginal_range;
    throw std::invalid_argument("unknown range source '" + std::string(s) + "'");
}

}  // namespace densum
