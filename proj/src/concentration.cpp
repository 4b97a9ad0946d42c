#include "densum/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

#include "densum/numeric_kernels.hpp"
#include "densum/u_class.hpp"

namespace densum {

namespace {

void check_tau(double tau) {
    if (!(tau >= 0.0) || !std::isfinite(tau)) throw std::invalid_argument("tau must be finite and >= 0");
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

TailBound capped(double tau, double value, Theorem th) { return TailBound{tau, std::min(1.0, value), th}; }

double pick(std::span<const double> v, std::size_t i) { return v.size() == 1 ? v[0] : v[i]; }

void check_broadcast(std::span<const double> v, std::size_t n, const char* what) {
    if (v.size() != n && v.size() != 1)
        throw std::invalid_argument(std::string(what) + " must have one entry or one per weight");
}

}  // namespace

double sum_w2r2(std::span<const double> w, std::span<const double> r) {
    check_broadcast(r, w.size(), "ranges");
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double ri = pick(r, i);
        if (!(ri > 0.0)) throw std::invalid_argument("ranges must be positive");
        acc += w[i] * w[i] * ri * ri;
    }
    return acc;
}

TailBound hoeffding_tail(double tau, double s) {
    check_tau(tau);
    if (!(s > 0.0)) throw std::invalid_argument("sum of w^2 R^2 must be positive");
    return capped(tau, 2.0 * std::exp(-2.0 * tau * tau / s), Theorem::hoeffding);
}

TailBound hoeffding_tail(double tau, std::span<const double> w, std::span<const double> r) {
    return hoeffding_tail(tau, sum_w2r2(w, r));
}

TailBound u_tail(double tau, double s) {
    check_tau(tau);
    if (!(s > 0.0)) throw std::invalid_argument("sum of w^2 R^2 must be positive");
    return capped(tau, 2.0 * std::exp(-6.0 * tau * tau / s), Theorem::u_sharp);
}

TailBound u_tail(double tau, std::span<const double> w, std::span<const double> r) {
    return u_tail(tau, sum_w2r2(w, r));
}

double bernstein_h(double u) { return (u + 1.0) * std::log1p(u) - u; }

TailBound bernstein_tail(double tau, double w, double m, std::span<const double> av_z2, BernsteinForm form) {
    check_tau(tau);
    if (!(m > 0.0)) throw std::invalid_argument("bound M must be positive");
    if (!(w > 0.0)) throw std::invalid_argument("common weight must be positive");
    double sum_av = 0.0;
    for (const double a : av_z2) {
        if (a < 0.0) throw std::invalid_argument("Av(e^2) must be >= 0");
        sum_av += a;
    }
    if (!(sum_av > 0.0)) throw std::invalid_argument("sum of Av(e^2) must be positive");
    if (form == BernsteinForm::h) {
        const double u = tau * m / (w * sum_av);
        return capped(tau, 2.0 * std::exp(-sum_av / (m * m) * bernstein_h(u)), Theorem::bernstein_h);
    }
    const double denom = 2.0 * w * w * sum_av + (2.0 / 3.0) * w * tau * m;
    return capped(tau, 2.0 * std::exp(-tau * tau / denom), Theorem::bernstein_simple);
}

double u_multiplier(double alpha) {
    check_alpha(alpha);
    return std::sqrt(std::log(2.0 / alpha) / 6.0);
}

ConfidenceSet ci_mean(const SampleSummary& summary, double r, double alpha, Method method, bool nonneg_m) {
    check_alpha(alpha);
    if (summary.n == 0) throw std::invalid_argument("empty sample summary");
    const double n = static_cast<double>(summary.n);
    const double ybar = summary.mean;
    const double log_term = std::log(2.0 / alpha);
    ConfidenceSet cs;
    cs.level = 1.0 - alpha;
    cs.method = method;
    cs.range_source = RangeSource::known;
    auto symmetric = [&](double half) {
        cs.lower = ybar - half;
        cs.upper = ybar + half;
    };
    auto need_range = [&] {
        if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("range must be finite and >= 0");
    };
    switch (method) {
        case Method::hoeffding:
            need_range();
            symmetric(r * std::sqrt(log_term / (2.0 * n)));
            break;
        case Method::u_sharp:
            need_range();
            symmetric(r * std::sqrt(log_term / (6.0 * n)));
            break;
        case Method::bernstein: {
            need_range();
            // Invert the simple form with w = 1/n, M = R/2, Av(e^2) = R^2/12.
            const double m = r / 2.0;
            const double v = 2.0 * (r * r / 12.0) / n;
            const double b = (2.0 / 3.0) * m / n;
            symmetric(0.5 * (log_term * b + std::sqrt(log_term * log_term * b * b + 4.0 * log_term * v)));
            break;
        }
        case Method::wald: {
            const double z = std_normal_quantile(1.0 - alpha / 2.0);
            symmetric(z * std::sqrt(summary.variance / n));
            break;
        }
        case Method::hoeffding_ratio: {
            if (!nonneg_m) throw std::domain_error("ratio form needs a nonnegative lower support bound");
            const double threshold = 2.0 * log_term;
            if (!(n > threshold)) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.3f", threshold);
                throw std::domain_error("ratio form requires n > 2 log(2/alpha) = " + std::string(buf));
            }
            const double q = std::sqrt(threshold / n);
            cs.lower = ybar / (1.0 + q);
            cs.upper = ybar / (1.0 - q);
            break;
        }
    }
    return cs;
}

ConfidenceSet ci_linear(double estimate, std::span<const double> w, const RangeSpec& ranges, double alpha) {
    const double c = u_multiplier(alpha);
    double sum_w2 = 0.0;
    for (const double x : w) sum_w2 += x * x;
    ConfidenceSet cs;
    cs.level = 1.0 - alpha;
    cs.method = Method::u_sharp;
    double half = 0.0;
    std::visit(
        [&](const auto& spec) {
            using T = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<T, KnownRanges>) {
                cs.range_source = RangeSource::known;
                check_broadcast(spec.ranges, w.size(), "ranges");
                double acc = 0.0;
                for (std::size_t i = 0; i < w.size(); ++i) {
                    const double ri = pick(spec.ranges, i);
                    if (!(ri >= 0.0)) throw std::invalid_argument("ranges must be >= 0");
                    acc += w[i] * w[i] * ri * ri;
                }
                half = std::sqrt(acc) * c;
            } else if constexpr (std::is_same_v<T, MarginalRange>) {
                cs.range_source = RangeSource::marginal_range;
                if (!(spec.range >= 0.0)) throw std::invalid_argument("marginal range must be >= 0");
                half = spec.range * std::sqrt(sum_w2) * c;
            } else if constexpr (std::is_same_v<T, TwoMeanRange>) {
                cs.range_source = RangeSource::two_mean;
                check_broadcast(spec.fitted_means, w.size(), "fitted means");
                double acc = 0.0;
                for (std::size_t i = 0; i < w.size(); ++i) {
                    const double mu = pick(spec.fitted_means, i);
                    if (mu < 0.0)
                        throw std::domain_error("two-mean range needs nonnegative fitted means (index " +
                                                std::to_string(i) + ")");
                    acc += w[i] * w[i] * 4.0 * mu * mu;
                }
                half = std::sqrt(acc) * c;
            } else if constexpr (std::is_same_v<T, WeightedResidualRange>) {
                cs.range_source = RangeSource::residual_range;
                if (!(spec.weighted_range >= 0.0)) throw std::invalid_argument("residual range must be >= 0");
                half = std::sqrt(static_cast<double>(w.size())) * spec.weighted_range * c;
            } else {
                cs.range_source = RangeSource::residual_range;
                if (!(spec.residual_range >= 0.0)) throw std::invalid_argument("residual range must be >= 0");
                half = spec.residual_range * std::sqrt(sum_w2) * c;
            }
        },
        ranges);
    cs.lower = estimate - half;
    cs.upper = estimate + half;
    return cs;
}

double optimal_s(double tau, double s, Theorem theorem) {
    if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
    if (!(s > 0.0)) throw std::invalid_argument("sum of w^2 R^2 must be positive");
    switch (theorem) {
        case Theorem::hoeffding: return 4.0 * tau / s;
        case Theorem::u_sharp: return 12.0 * tau / s;
        default: throw std::invalid_argument("optimal_s is defined for the hoeffding and u_sharp bounds");
    }
}

double optimal_s_simulation(double m, double c_star, double sum_w2, double alpha) {
    const double denom = m * m * c_star * sum_w2;
    if (!(denom > 0.0)) throw std::invalid_argument("M^2 c* sum w^2 must be positive");
    return 6.0 / std::sqrt(denom) * u_multiplier(alpha);
}

double rule_of_thumb(std::span<const double> w, std::span<const double> variances, std::span<const double> r) {
    check_broadcast(variances, w.size(), "variances");
    check_broadcast(r, w.size(), "ranges");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double w2 = w[i] * w[i];
        const double ri = pick(r, i);
        num += w2 * ri * ri;
        den += w2 * pick(variances, i);
    }
    if (!(den > 0.0)) throw std::domain_error("rule of thumb needs a positive weighted variance");
    return num / (12.0 * den) - 1.0;
}

std::string_view to_string(A5Verdict v) noexcept {
    switch (v) {
        case A5Verdict::holds: return "holds";
        case A5Verdict::violated: return "violated";
        case A5Verdict::boundary: return "boundary";
    }
    return "unknown";
}

namespace {

struct LogMean {
    double log_mean;
    double se;  // standard error of the mean on the natural scale
};

// log(N^-1 sum exp(x_r)) and the standard error of that mean.
LogMean log_mean_exp(std::span<const double> proj, double sign_s) {
    double shift = -std::numeric_limits<double>::infinity();
    for (const double p : proj) shift = std::max(shift, sign_s * p);
    std::vector<double> e(proj.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < proj.size(); ++i) sum += e[i] = std::exp(sign_s * proj[i] - shift);
    const double n = static_cast<double>(proj.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (const double v : e) ss += (v - mean) * (v - mean);
    const double var = n > 1 ? ss / (n - 1.0) : 0.0;
    return LogMean{shift + std::log(mean), std::exp(shift) * std::sqrt(var / n)};
}

}  // namespace

A5Report a5_from_projections(std::span<const double> projections, double s, double log_av_star) {
    if (projections.empty()) throw std::invalid_argument("no projections supplied");
    if (s < 0.0) throw std::invalid_argument("s must be >= 0");
    const LogMean up = log_mean_exp(projections, s);
    const LogMean down = log_mean_exp(projections, -s);
    const LogMean& top = up.log_mean >= down.log_mean ? up : down;
    A5Report r;
    r.s_used = s;
    r.log_a_hat = top.log_mean;
    r.a_hat = std::exp(top.log_mean);
    r.a_hat_se = top.se;
    r.log_av_star = log_av_star;
    r.av_star = std::exp(log_av_star);
    if (std::fabs(r.a_hat - r.av_star) <= r.a_hat_se) r.verdict = A5Verdict::boundary;
    else r.verdict = r.log_a_hat < r.log_av_star ? A5Verdict::holds : A5Verdict::violated;
    return r;
}

A5Report a5_empirical(const Matrix& draws, std::span<const double> w, double s, std::span<const double> m) {
    if (!(s > 0.0)) throw std::invalid_argument("s must be positive");
    if (draws.cols() != static_cast<Eigen::Index>(w.size()))
        throw std::invalid_argument("draw columns do not match weights");
    const Eigen::Map<const Vector> wv(w.data(), static_cast<Eigen::Index>(w.size()));
    const Vector proj = draws * wv;
    return a5_from_projections(std::span<const double>(proj.data(), static_cast<std::size_t>(proj.size())), s,
                               log_av_product(s, w, m));
}

}  // namespace densum
