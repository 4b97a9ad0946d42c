#include "densum/variance_identity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace densum {

namespace {

void check_variances(std::span<const double> variances, Eigen::Index n) {
    if (static_cast<Eigen::Index>(variances.size()) != n)
        throw std::invalid_argument("variance vector length does not match weight columns");
    for (const double v : variances) {
        if (!std::isfinite(v)) throw std::invalid_argument("variance is not finite");
        if (v < 0.0) throw std::invalid_argument("negative variance");
    }
}

Matrix naive_part(const Matrix& w, std::span<const double> variances) {
    const Eigen::Map<const Vector> v(variances.data(), static_cast<Eigen::Index>(variances.size()));
    return w * v.asDiagonal() * w.transpose();
}

// phi = C / (naive / n), zero where both vanish.
Matrix ratio_to_naive(const Matrix& c, const Matrix& naive, double n) {
    Matrix out(c.rows(), c.cols());
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            const double denom = naive(i, j) / n;
            if (denom != 0.0) out(i, j) = c(i, j) / denom;
            else if (c(i, j) == 0.0) out(i, j) = 0.0;
            else throw std::domain_error("zero weighted variance; phi undefined for row pair " +
                                         std::to_string(i) + "," + std::to_string(j));
        }
    }
    return out;
}

Matrix moulton_gamma(const Matrix& naive, const Matrix& c, double n) {
    const Matrix scaled = naive / n;
    return scaled.completeOrthogonalDecomposition().solve(c);
}

void check_total_diagonal(const Matrix& total, const Matrix& naive) {
    for (Eigen::Index s = 0; s < total.rows(); ++s) {
        const double tol = 1e-12 * std::max(1.0, std::fabs(naive(s, s)));
        if (total(s, s) < -tol)
            throw std::domain_error("inconsistent summary: 1 + mu*phi < 0 for statistic " + std::to_string(s));
    }
}

void check_mu(double mu) {
    if (!std::isfinite(mu) || mu < 0.0) throw std::invalid_argument("mean degree mu must be finite and >= 0");
}

}  // namespace

VarianceDecomposition additive_variance(const WeightMatrix& w, std::span<const double> variances, double mu,
                                        const AverageCovariance& c) {
    check_mu(mu);
    check_variances(variances, w.cols());
    const Eigen::Index p = w.rows();
    if (c.values.rows() != p || c.values.cols() != p)
        throw std::invalid_argument("average covariance must be p x p");
    VarianceDecomposition out;
    out.n = static_cast<std::size_t>(w.cols());
    out.mu = mu;
    const double n = static_cast<double>(out.n);
    out.naive = naive_part(w.entries(), variances);
    out.avg_cov = c.values;
    out.total = out.naive + n * mu * c.values;
    check_total_diagonal(out.total, out.naive);
    out.phi = ratio_to_naive(c.values, out.naive, n);
    out.inflation = (1.0 + mu * out.phi.array()).matrix();
    out.gamma = moulton_gamma(out.naive, c.values, n);
    return out;
}

VarianceDecomposition additive_variance(const WeightMatrix& w, std::span<const double> variances, double mu,
                                        const AverageCorrelation& phi) {
    check_mu(mu);
    check_variances(variances, w.cols());
    const Eigen::Index p = w.rows();
    if (phi.values.rows() != p || phi.values.cols() != p)
        throw std::invalid_argument("average correlation must be p x p");
    for (Eigen::Index s = 0; s < p; ++s) {
        if (1.0 + mu * phi.values(s, s) < 0.0)
            throw std::domain_error("inconsistent summary: 1 + mu*phi < 0 for statistic " + std::to_string(s));
    }
    VarianceDecomposition out;
    out.n = static_cast<std::size_t>(w.cols());
    out.mu = mu;
    const double n = static_cast<double>(out.n);
    out.naive = naive_part(w.entries(), variances);
    out.phi = phi.values;
    out.inflation = (1.0 + mu * phi.values.array()).matrix();
    out.total = out.naive.cwiseProduct(out.inflation);
    out.avg_cov = phi.values.cwiseProduct(out.naive) / n;
    out.gamma = moulton_gamma(out.naive, out.avg_cov, n);
    return out;
}

VarianceDecomposition additive_variance(std::span<const double> w, std::span<const double> variances,
                                        const DependencySummary& dep, SummaryRoute route) {
    const WeightMatrix wm(w);
    if (route == SummaryRoute::sigma_bar)
        return additive_variance(wm, variances, dep.mu, AverageCovariance{Matrix::Constant(1, 1, dep.sigma_bar)});
    return additive_variance(wm, variances, dep.mu, AverageCorrelation{Matrix::Constant(1, 1, dep.phi)});
}

RowPairDependency row_pair_summaries(const Matrix& cov, const WeightMatrix& w) {
    const Eigen::Index n = cov.rows();
    if (cov.cols() != n) throw std::invalid_argument("covariance must be square");
    if (w.cols() != n) throw std::invalid_argument("weight columns do not match covariance size");
    if (!cov.allFinite()) throw std::invalid_argument("covariance has non-finite entries");
    const double scale = cov.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            if (std::fabs(cov(i, j) - cov(j, i)) > 1e-12 * std::max(scale, 1e-300))
                throw std::invalid_argument("covariance is asymmetric");
        }
    }

    const double threshold = kEdgeTolerance * scale;
    Matrix off = Matrix::Zero(n, n);
    RowPairDependency out;
    out.degrees.assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j || !(std::fabs(cov(i, j)) > threshold)) continue;
            off(i, j) = cov(i, j);
            ++out.degrees[static_cast<std::size_t>(i)];
        }
    }
    const std::size_t degree_sum = std::accumulate(out.degrees.begin(), out.degrees.end(), std::size_t{0});
    out.edges = degree_sum / 2;
    out.mu = static_cast<double>(degree_sum) / static_cast<double>(n);

    const Matrix& wm = w.entries();
    const Eigen::Index p = wm.rows();
    // Symmetric form (2|L|)^-1 sum_{i != j} w_{r,i} w_{t,j} sigma_ij; equals
    // |L|^-1 sum_{i<j} on the diagonal and keeps the identity exact off it.
    out.sigma_bar = out.edges == 0 ? Matrix::Zero(p, p)
                                   : Matrix(wm * off * wm.transpose() / (2.0 * static_cast<double>(out.edges)));
    std::vector<double> variances(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) variances[static_cast<std::size_t>(i)] = cov(i, i);
    const Matrix naive = naive_part(wm, variances);
    out.phi = ratio_to_naive(out.sigma_bar, naive, static_cast<double>(n));
    return out;
}

DependencySummary summaries_from_covariance(const Matrix& cov, std::span<const double> w) {
    const RowPairDependency rp = row_pair_summaries(cov, WeightMatrix(w));
    return DependencySummary{rp.mu, rp.phi(0, 0), rp.sigma_bar(0, 0), GraphKind::linear};
}

Interval phi_bounds(double mu, std::size_t n) {
    if (!(mu > 0.0)) throw std::domain_error("phi bounds need mu > 0");
    if (n < 2) throw std::invalid_argument("phi bounds need n >= 2");
    return Interval{-1.0 / mu, static_cast<double>(n - 1) / mu};
}

bool phi_within_bounds(const DependencySummary& dep, std::size_t n, std::span<const double> w, double tol) {
    if (w.size() != n) throw std::invalid_argument("weight length does not match n");
    for (const double x : w) {
        if (x != w.front())
            throw std::domain_error("phi bounds are established for unweighted sums only");
    }
    if (dep.mu <= 0.0) return true;
    return phi_bounds(dep.mu, n).contains(dep.phi, tol);
}

EtaBound eta_bound(std::span<const double> variances, double mu) {
    if (variances.empty()) throw std::invalid_argument("no variances given");
    if (!std::isfinite(mu) || mu < 0.0) throw std::invalid_argument("mean degree mu must be finite and >= 0");
    double sum = 0.0, mx = 0.0;
    for (const double v : variances) {
        if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("variances must be finite and >= 0");
        sum += v;
        mx = std::max(mx, v);
    }
    if (sum == 0.0) throw std::domain_error("all variances are zero");
    EtaBound out;
    out.eta = mx / (sum / static_cast<double>(variances.size()));
    out.factor = 1.0 + mu * out.eta;
    out.bound = out.factor * sum;
    return out;
}

ClusterVarianceSummary cluster_variance_identity(std::vector<Matrix> cluster_variances, double mu_t,
                                                 const Matrix& sigma_bar_t) {
    if (cluster_variances.empty()) throw std::invalid_argument("no cluster variances given");
    const Eigen::Index q = sigma_bar_t.rows();
    if (sigma_bar_t.cols() != q) throw std::invalid_argument("sigma_bar_T must be square");
    Matrix sum = Matrix::Zero(q, q);
    for (const Matrix& v : cluster_variances) {
        if (v.rows() != q || v.cols() != q) throw std::invalid_argument("cluster variance dimension mismatch");
        sum += v;
    }
    const double k = static_cast<double>(cluster_variances.size());
    ClusterVarianceSummary out;
    out.mu_t = mu_t;
    out.sigma_bar_t = sigma_bar_t;
    out.total = sum + k * mu_t * sigma_bar_t;
    const Matrix mean_var = sum / k;
    out.phi_t = Matrix::Zero(q, q);
    for (Eigen::Index i = 0; i < q; ++i) {
        for (Eigen::Index j = 0; j < q; ++j) {
            if (mean_var(i, j) != 0.0) out.phi_t(i, j) = sigma_bar_t(i, j) / mean_var(i, j);
        }
    }
    out.cluster_variances = std::move(cluster_variances);
    return out;
}

ClusterVarianceSummary cluster_summaries_from_covariance(const Matrix& cov, const WeightMatrix& w,
                                                         const Partition& partition) {
    const Eigen::Index n = cov.rows();
    if (cov.cols() != n || w.cols() != n || static_cast<Eigen::Index>(partition.size()) != n)
        throw std::invalid_argument("covariance, weights and partition sizes disagree");
    const Eigen::Index q = w.rows();
    const auto& clusters = partition.clusters();
    const std::size_t k = clusters.size();

    // Column-restricted weights per cluster.
    std::vector<Matrix> wk(k, Matrix::Zero(q, n));
    for (std::size_t c = 0; c < k; ++c) {
        for (const std::size_t i : clusters[c]) wk[c].col(static_cast<Eigen::Index>(i)) = w.entries().col(static_cast<Eigen::Index>(i));
    }
    std::vector<Matrix> var_t;
    var_t.reserve(k);
    for (std::size_t c = 0; c < k; ++c) var_t.push_back(wk[c] * cov * wk[c].transpose());

    const double scale = cov.cwiseAbs().maxCoeff();
    Matrix cross_sum = Matrix::Zero(q, q);
    std::size_t directed_edges = 0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            if (a == b) continue;
            const Matrix c = wk[a] * cov * wk[b].transpose();
            if (c.cwiseAbs().maxCoeff() > kEdgeTolerance * scale) {
                cross_sum += c;
                ++directed_edges;
            }
        }
    }
    const double mu_t = static_cast<double>(directed_edges) / static_cast<double>(k);
    const Matrix sigma_bar_t =
        directed_edges == 0 ? Matrix::Zero(q, q) : Matrix(cross_sum / static_cast<double>(directed_edges));
    return cluster_variance_identity(std::move(var_t), mu_t, sigma_bar_t);
}

}  // namespace densum
