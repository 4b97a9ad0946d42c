#include "densum/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "densum/numeric_kernels.hpp"

namespace densum {

namespace {

Eigen::Map<const Vector> as_vector(std::span<const double> v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::span<const double> as_span(const Vector& v) {
    return std::span<const double>(v.data(), static_cast<std::size_t>(v.size()));
}

// Weight rows R^-1 Q1^T of a full-rank design, or the first dependent column.
Matrix qr_weight_rows(const Matrix& x, const std::vector<std::string>& names) {
    const Eigen::Index n = x.rows(), p = x.cols();
    if (p == 0) throw std::invalid_argument("design has no columns");
    if (n < p) throw RankDeficientError(static_cast<std::size_t>(n), "design has fewer rows than columns");
    if (!x.allFinite()) throw std::invalid_argument("design has non-finite entries");
    Eigen::HouseholderQR<Matrix> qr(x);
    const Matrix r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const double tol = 1e-10 * x.norm();
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!(std::fabs(r(j, j)) > tol)) {
            const std::size_t col = static_cast<std::size_t>(j);
            const std::string label = col < names.size() ? "'" + names[col] + "'" : std::to_string(col);
            throw RankDeficientError(col, "design is rank deficient: column " + label +
                                              " is a linear combination of earlier columns");
        }
    }
    const Matrix q1 = qr.householderQ() * Matrix::Identity(n, p);
    return r.triangularView<Eigen::Upper>().solve(q1.transpose());
}

}  // namespace

Vector RegressionFit::weighted_residuals(std::size_t s) const {
    if (s >= p()) throw std::out_of_range("statistic index out of range");
    return weight_rows.row(static_cast<Eigen::Index>(s)).transpose().cwiseProduct(residuals);
}

OlsProjector::OlsProjector(Matrix design, std::vector<std::string> column_names)
    : design_(std::move(design)), weights_(qr_weight_rows(design_, column_names)) {}

RegressionFit OlsProjector::fit(std::span<const double> y) const {
    if (static_cast<Eigen::Index>(y.size()) != design_.rows())
        throw std::invalid_argument("response length does not match design rows");
    RegressionFit f;
    f.design = design_;
    f.y = as_vector(y);
    if (!f.y.allFinite()) throw std::invalid_argument("response has non-finite values");
    f.weight_rows = weights_;
    f.coefficients = weights_ * f.y;
    f.fitted = design_ * f.coefficients;
    f.residuals = f.y - f.fitted;
    return f;
}

RegressionFit ols_fit(const Matrix& x, std::span<const double> y, std::vector<std::string> column_names) {
    return OlsProjector(x, std::move(column_names)).fit(y);
}

double meat_estimator(std::span<const double> ws, std::span<const double> wt, std::span<const double> residuals) {
    if (ws.size() != residuals.size() || wt.size() != residuals.size())
        throw std::invalid_argument("weight rows and residuals differ in length");
    double acc = 0.0;
    // Grouped as (W_s e)(W_t e) so singleton clusters reproduce it bit for bit.
    for (std::size_t i = 0; i < residuals.size(); ++i) acc += (ws[i] * residuals[i]) * (wt[i] * residuals[i]);
    return acc;
}

double meat_estimator(const RegressionFit& fit, std::size_t s, std::size_t t) {
    if (s >= fit.p() || t >= fit.p()) throw std::out_of_range("statistic index out of range");
    const Vector ws = fit.weight_rows.row(static_cast<Eigen::Index>(s)).transpose();
    const Vector wt = fit.weight_rows.row(static_cast<Eigen::Index>(t)).transpose();
    return meat_estimator(as_span(ws), as_span(wt), as_span(fit.residuals));
}

ClusterVarianceEstimate cluster_robust(std::span<const double> weighted_residuals, const Partition& partition) {
    if (weighted_residuals.size() != partition.size())
        throw std::invalid_argument("partition size does not match the residuals");
    ClusterVarianceEstimate out{0.0, {}, partition};
    out.contributions.reserve(partition.num_clusters());
    for (const auto& members : partition.clusters()) {
        double t = 0.0;
        for (const std::size_t j : members) t += weighted_residuals[j];
        out.contributions.push_back(t * t);
        out.value += t * t;
    }
    return out;
}

ClusterVarianceEstimate cluster_robust(const RegressionFit& fit, const Partition& partition, std::size_t s) {
    const Vector z = fit.weighted_residuals(s);
    return cluster_robust(as_span(z), partition);
}

PartitionComparison partition_compare(std::span<const double> weighted_residuals,
                                      const std::vector<Partition>& partitions, double tie_tolerance) {
    if (partitions.size() < 2) throw std::invalid_argument("partition comparison needs at least two partitions");
    PartitionComparison out;
    for (const Partition& p : partitions) out.values.push_back(cluster_robust(weighted_residuals, p).value);
    const std::size_t k = out.values.size();
    out.differences = Matrix(k, k);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) out.differences(a, b) = out.values[a] - out.values[b];

    const double scale = std::max(1e-300, *std::max_element(out.values.begin(), out.values.end()));
    const double tol = tie_tolerance * scale;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b)
            if (std::fabs(out.values[a] - out.values[b]) <= tol) out.ties.emplace_back(a, b);

    out.ranking.resize(k);
    std::iota(out.ranking.begin(), out.ranking.end(), std::size_t{0});
    // Values within the tie tolerance keep input order.
    std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](std::size_t a, std::size_t b) {
        return out.values[a] - out.values[b] > tol;
    });
    out.recommended = out.ranking.front();
    return out;
}

PartitionComparison partition_compare(const RegressionFit& fit, const std::vector<Partition>& partitions,
                                      std::size_t s, double tie_tolerance) {
    const Vector z = fit.weighted_residuals(s);
    return partition_compare(as_span(z), partitions, tie_tolerance);
}

ResidualRange residual_range(std::span<const double> weighted_residuals) {
    if (weighted_residuals.size() < 2) throw std::invalid_argument("residual range needs n >= 2");
    const auto [mn, mx] = std::minmax_element(weighted_residuals.begin(), weighted_residuals.end());
    ResidualRange out;
    out.value = *mx - *mn;
    if (out.value == 0.0) {
        out.degenerate = true;
        out.warning = "degenerate spread: all weighted residuals are equal";
    }
    return out;
}

ResidualRange residual_range(const RegressionFit& fit, std::size_t s) {
    const Vector z = fit.weighted_residuals(s);
    return residual_range(as_span(z));
}

IrwlsFit irwls_fit(const Matrix& x, std::span<const double> y, Link link, double tol, int max_iter) {
    if (max_iter <= 0) throw std::invalid_argument("irwls needs max_iter >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("irwls tolerance must be positive");
    const Eigen::Index n = x.rows();
    if (static_cast<Eigen::Index>(y.size()) != n) throw std::invalid_argument("response length does not match design");
    const Vector yv = as_vector(y);
    if (link == Link::logit && ((yv.array() < 0.0) || (yv.array() > 1.0)).any())
        throw std::invalid_argument("logit link needs responses in [0, 1]");
    if (link == Link::log && (yv.array() < 0.0).any())
        throw std::invalid_argument("log link needs nonnegative responses");

    auto mean_of = [&](const Vector& eta) -> Vector {
        switch (link) {
            case Link::identity: return eta;
            case Link::logit: return (1.0 / (1.0 + (-eta.array()).exp())).matrix();
            case Link::log: return eta.array().exp().matrix();
        }
        return eta;
    };
    // Variance function, equal to d mu / d eta for these canonical links.
    auto variance_of = [&](const Vector& mu) -> Vector {
        switch (link) {
            case Link::identity: return Vector::Ones(mu.size());
            case Link::logit: return (mu.array() * (1.0 - mu.array())).matrix();
            case Link::log: return mu;
        }
        return mu;
    };

    Vector mu(n), eta(n);
    switch (link) {
        case Link::identity: mu = yv; eta = yv; break;
        case Link::logit:
            mu = ((yv.array() + 0.5) / 2.0).matrix();
            eta = (mu.array() / (1.0 - mu.array())).log().matrix();
            break;
        case Link::log:
            mu = (yv.array() + 0.1).matrix();
            eta = mu.array().log().matrix();
            break;
    }

    IrwlsFit out;
    out.link = link;
    Vector beta;
    Vector omega;
    for (int it = 1; it <= max_iter; ++it) {
        omega = variance_of(mu);
        const Vector z = eta + ((yv - mu).array() / omega.array()).matrix();
        const Vector root = omega.array().sqrt().matrix();
        const Matrix xw = root.asDiagonal() * x;
        const Matrix wr = qr_weight_rows(xw, {});
        Vector next = wr * (root.asDiagonal() * z);
        eta = x * next;
        mu = mean_of(eta);
        if (link == Link::logit && ((mu.array() < 1e-10) || (mu.array() > 1.0 - 1e-10)).any())
            throw std::domain_error("logit fit: separation detected (fitted probabilities reach 0 or 1)");
        if (!next.allFinite()) throw ConvergenceError("irwls diverged");
        out.trace.push_back(next);
        const bool done = it > 1 && (next - beta).cwiseAbs().maxCoeff() < tol;
        beta = std::move(next);
        out.iterations = it;
        if (done) {
            omega = variance_of(mu);
            const Vector r2 = omega.array().sqrt().matrix();
            out.weight_rows = qr_weight_rows(r2.asDiagonal() * x, {}) * r2.asDiagonal();
            out.working_weights = omega;
            out.coefficients = beta;
            out.fitted = mu;
            out.residuals = yv - mu;
            return out;
        }
    }
    throw ConvergenceError("irwls did not converge within " + std::to_string(max_iter) + " iterations");
}

namespace {

// Applies V_k^-1 for the exchangeable working matrix (1 - rho) I + rho 1 1^T.
void apply_exchangeable_inverse(Eigen::Ref<Matrix> block, double rho) {
    const double m = static_cast<double>(block.rows());
    const double c = rho / (1.0 + (m - 1.0) * rho);
    const Eigen::RowVectorXd sums = block.colwise().sum();
    block.rowwise() -= c * sums;
    block /= (1.0 - rho);
}

}  // namespace

GeeFit gee_exchangeable(const Matrix& x, std::span<const double> y, const Partition& partition,
                        const GeeOptions& options) {
    const Eigen::Index n = x.rows(), p = x.cols();
    if (static_cast<Eigen::Index>(y.size()) != n || partition.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("design, response and partition sizes disagree");
    if (partition.num_clusters() < 2) throw std::invalid_argument("GEE comparator needs at least two clusters");
    const Vector yv = as_vector(y);
    const auto& clusters = partition.clusters();

    // Cluster-contiguous copies so each cluster is a row block.
    std::vector<Eigen::Index> order;
    std::vector<Eigen::Index> starts;
    order.reserve(static_cast<std::size_t>(n));
    std::size_t max_size = 1;
    for (const auto& members : clusters) {
        starts.push_back(static_cast<Eigen::Index>(order.size()));
        for (const std::size_t i : members) order.push_back(static_cast<Eigen::Index>(i));
        max_size = std::max(max_size, members.size());
    }
    starts.push_back(n);
    Matrix xs(n, p);
    Vector ys(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        xs.row(r) = x.row(order[static_cast<std::size_t>(r)]);
        ys(r) = yv(order[static_cast<std::size_t>(r)]);
    }

    GeeFit out;
    Vector beta = qr_weight_rows(xs, {}) * ys;
    double pairs = 0.0;
    for (const auto& members : clusters) {
        const double m = static_cast<double>(members.size());
        pairs += m * (m - 1.0) / 2.0;
    }
    const double rho_lo = max_size > 1 ? -1.0 / static_cast<double>(max_size - 1) + 1e-6 : -0.999999;

    Matrix bread(p, p);
    for (int it = 1; it <= options.max_iter; ++it) {
        const Vector e = ys - xs * beta;
        double rho = 0.0;
        if (pairs > 0.0) {
            double cross = 0.0;
            for (std::size_t k = 0; k + 1 < starts.size(); ++k) {
                const Eigen::Index a = starts[k], len = starts[k + 1] - starts[k];
                const double s = e.segment(a, len).sum();
                cross += 0.5 * (s * s - e.segment(a, len).squaredNorm());
            }
            const double scale = e.squaredNorm() / static_cast<double>(n);
            rho = scale > 0.0 ? (cross / pairs) / scale : 0.0;
            rho = std::clamp(rho, rho_lo, 1.0 - 1e-6);
        }
        Matrix vx = xs;
        Vector vy = ys;
        for (std::size_t k = 0; k + 1 < starts.size(); ++k) {
            const Eigen::Index a = starts[k], len = starts[k + 1] - starts[k];
            apply_exchangeable_inverse(vx.middleRows(a, len), rho);
            apply_exchangeable_inverse(vy.segment(a, len), rho);
        }
        bread = xs.transpose() * vx;
        const Vector next = bread.ldlt().solve(xs.transpose() * vy);
        const double change = (next - beta).cwiseAbs().maxCoeff();
        beta = next;
        out.rho = rho;
        out.iterations = it;
        if (change < options.tol * (1.0 + beta.cwiseAbs().maxCoeff())) break;
    }

    const Vector e = ys - xs * beta;
    Matrix meat = Matrix::Zero(p, p);
    for (std::size_t k = 0; k + 1 < starts.size(); ++k) {
        const Eigen::Index a = starts[k], len = starts[k + 1] - starts[k];
        Vector ve = e.segment(a, len);
        apply_exchangeable_inverse(ve, out.rho);
        const Vector u = xs.middleRows(a, len).transpose() * ve;
        meat.noalias() += u * u.transpose();
    }
    Matrix ve_x = xs;
    for (std::size_t k = 0; k + 1 < starts.size(); ++k) {
        const Eigen::Index a = starts[k], len = starts[k + 1] - starts[k];
        apply_exchangeable_inverse(ve_x.middleRows(a, len), out.rho);
    }
    bread = xs.transpose() * ve_x;
    const Matrix bread_inv = bread.ldlt().solve(Matrix::Identity(p, p));
    out.coefficients = beta;
    out.robust_covariance = bread_inv * meat * bread_inv;
    return out;
}

ConfidenceSet gee_exchangeable_wald(const Matrix& x, std::span<const double> y, const Partition& partition,
                                    double alpha, std::size_t s, const GeeOptions& options) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (s >= static_cast<std::size_t>(x.cols())) throw std::out_of_range("coefficient index out of range");
    const GeeFit g = gee_exchangeable(x, y, partition, options);
    const auto si = static_cast<Eigen::Index>(s);
    const double se = std::sqrt(std::max(0.0, g.robust_covariance(si, si)));
    const double z = std_normal_quantile(1.0 - alpha / 2.0);
    ConfidenceSet cs;
    cs.lower = g.coefficients(si) - z * se;
    cs.upper = g.coefficients(si) + z * se;
    cs.level = 1.0 - alpha;
    cs.method = Method::wald;
    cs.range_source = RangeSource::known;
    return cs;
}

AcfResult acf_phi_hat(std::span<const double> series, std::size_t lags) {
    const std::size_t n = series.size();
    if (lags < 1 || lags >= n) throw std::invalid_argument("acf needs 1 <= L < n");
    double mean = 0.0;
    for (const double v : series) mean += v;
    mean /= static_cast<double>(n);
    double denom = 0.0;
    for (const double v : series) denom += (v - mean) * (v - mean);
    if (!(denom > 0.0)) throw std::domain_error("acf undefined for a constant series");
    AcfResult out;
    out.lags = lags;
    out.r.reserve(lags);
    for (std::size_t l = 1; l <= lags; ++l) {
        double num = 0.0;
        for (std::size_t t = 0; t + l < n; ++t) num += (series[t] - mean) * (series[t + l] - mean);
        out.r.push_back(num / denom);
    }
    out.phi_hat = std::accumulate(out.r.begin(), out.r.end(), 0.0) / static_cast<double>(lags);
    return out;
}

std::pair<std::size_t, std::size_t> acf_lag_windows(std::size_t n) {
    if (n < 2) throw std::invalid_argument("lag windows need n >= 2");
    auto short_window = static_cast<std::size_t>(std::floor(10.0 * std::log10(static_cast<double>(n))));
    std::size_t long_window = (n - 1) / 2;
    short_window = std::clamp<std::size_t>(short_window, 1, n - 1);
    long_window = std::clamp<std::size_t>(long_window, 1, n - 1);
    return {short_window, long_window};
}

}  // namespace densum
