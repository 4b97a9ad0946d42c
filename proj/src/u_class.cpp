#include "densum/u_class.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace densum {

double av_moment(const SupportSpec& support, int k) {
    if (k < 0) throw std::invalid_argument("moment order must be >= 0");
    if (support.continuity() != Continuity::continuous)
        throw std::invalid_argument("av_moment needs a continuous interval support");
    const double m = support.lower(), mx = support.upper();
    if (support.symmetric()) return k % 2 == 1 ? 0.0 : std::pow(mx, k) / (k + 1);
    return (std::pow(mx, k + 1) - std::pow(m, k + 1)) / ((k + 1) * (mx - m));
}

double log_sinhc(double x) {
    x = std::fabs(x);
    if (x < 1e-2) {
        const double x2 = x * x;
        return std::log1p(x2 / 6.0 + x2 * x2 / 120.0 + x2 * x2 * x2 / 5040.0);
    }
    if (x < 20.0) return std::log(std::sinh(x) / x);
    return x - std::log(2.0 * x) + std::log1p(-std::exp(-2.0 * x));
}

double sinhc(double x) {
    x = std::fabs(x);
    if (x < 1e-2) {
        const double x2 = x * x;
        return 1.0 + x2 / 6.0 + x2 * x2 / 120.0 + x2 * x2 * x2 / 5040.0;
    }
    if (x < 700.0) return std::sinh(x) / x;
    return std::exp(log_sinhc(x));
}

double av_exp(double s, double w, double m) { return sinhc(s * w * m); }

double log_av_product(double s, std::span<const double> w, std::span<const double> m) {
    if (m.size() != w.size() && m.size() != 1)
        throw std::invalid_argument("bounds must have one entry or one per weight");
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += log_sinhc(s * w[i] * (m.size() == 1 ? m[0] : m[i]));
    return acc;
}

double av_product(double s, std::span<const double> w, std::span<const double> m) {
    return std::exp(log_av_product(s, w, m));
}

double av_exp_interval(double s, const SupportSpec& support) {
    const double lo = support.lower(), hi = support.upper();
    const double half = 0.5 * (hi - lo);
    // Av(e^{sZ}) = e^{s mid} sinh(s half)/(s half)
    return std::exp(s * support.midpoint()) * sinhc(s * half);
}

double u_mgf_bound(double s, double w, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("range must be positive");
    const double x = s * w * r;
    return std::exp(x * x / 24.0);
}

double hoeffding_av_bound(double s, const SupportSpec& support, double av) {
    if (s < 0.0) throw std::invalid_argument("s must be >= 0");
    const double r = support.range();
    return std::exp(s * av + s * s * r * r / 8.0);
}

double bernstein_av_bound(double s, double m, double av_z2) {
    if (!(m > 0.0)) throw std::invalid_argument("bound M must be positive");
    if (av_z2 < 0.0) throw std::invalid_argument("Av(Z^2) must be >= 0");
    const double sm = s * m;
    return std::exp(av_z2 / (m * m) * (std::expm1(sm) - sm));
}

double discrete_mgf_adjustment(double av_exp_value, int m) {
    if (m <= 0) throw std::invalid_argument("integer bound M must be positive");
    const double card = 2.0 * m + 1.0;
    return card / (2.0 * m) * (av_exp_value - 1.0 / card);
}

namespace {

UDiagnosticsReport finish_report(double mean, double lo, double hi, double tol) {
    UDiagnosticsReport r;
    r.expected_value = mean;
    r.midpoint = 0.5 * (lo + hi);
    r.functional_average = r.midpoint;
    r.tolerance = tol;
    r.is_u = std::fabs(mean - r.midpoint) <= tol;
    r.is_sub_u = r.functional_average <= mean + tol;
    r.cdf_area_gap = (hi - mean) - (mean - lo);
    return r;
}

}  // namespace

UDiagnosticsReport check_u_class(double expected_value, const SupportSpec& support) {
    if (!std::isfinite(expected_value)) throw std::invalid_argument("expected value must be finite");
    const double lo = support.lower(), hi = support.upper();
    return finish_report(expected_value, lo, hi, 1e-3 * support.range());
}

UDiagnosticsReport check_u_class(const Sample& sample, const std::optional<SupportSpec>& support) {
    const auto v = sample.values();
    const std::size_t n = v.size();
    double mean = 0.0;
    for (const double x : v) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const double x : v) ss += (x - mean) * (x - mean);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    const double tol = 3.0 * sd / std::sqrt(static_cast<double>(n));

    if (support) {
        UDiagnosticsReport r = finish_report(mean, support->lower(), support->upper(), tol);
        return r;
    }
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    UDiagnosticsReport r = finish_report(mean, *mn, *mx, tol);
    r.support_estimated = true;
    const bool integral = std::all_of(v.begin(), v.end(), [](double x) { return std::floor(x) == x; });
    if (integral && *mx - *mn <= 1e6) {
        std::set<double> seen(v.begin(), v.end());
        r.is_regular = seen.size() == static_cast<std::size_t>(*mx - *mn) + 1;
    }
    return r;
}

std::vector<MomentCheck> moment_condition_check(std::span<const double> moments, double r) {
    if (!(r > 0.0)) throw std::invalid_argument("range must be positive");
    std::vector<MomentCheck> out;
    out.reserve(moments.size());
    for (std::size_t i = 0; i < moments.size(); ++i) {
        MomentCheck c;
        c.k = static_cast<int>(i + 1);
        c.value = moments[i];
        c.bound = c.k % 2 == 1 ? 0.0 : std::pow(r / 2.0, c.k) / (c.k + 1);
        c.pass = c.value <= c.bound + 1e-12 * std::max(1.0, std::fabs(c.bound));
        out.push_back(c);
    }
    return out;
}

namespace {

// Shared enumeration for Eq. (1) and (2): values g_j with masses f_j > 0 on
// a support of size R.
IdentityCheck enumerate_identity(std::span<const double> g, std::span<const double> f) {
    const double r = static_cast<double>(g.size());
    double av = 0.0, eg = 0.0, e_inv = 0.0, e_g_inv = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        av += g[j];
        eg += g[j] * f[j];
        e_inv += f[j] * (1.0 / f[j]);
        e_g_inv += f[j] * g[j] * (1.0 / f[j]);
    }
    av /= r;
    const double cov = e_g_inv - eg * e_inv;
    IdentityCheck out;
    out.lhs = av;
    out.rhs = eg + cov / r;
    out.gap = std::fabs(out.lhs - out.rhs);
    return out;
}

void check_total_mass(double total) {
    if (std::fabs(total - 1.0) > 1e-9) throw std::invalid_argument("pmf does not sum to 1");
}

}  // namespace

IdentityCheck eq1_identity_check(std::span<const double> support, std::span<const double> pmf) {
    if (support.empty() || support.size() != pmf.size())
        throw std::invalid_argument("support and pmf must be nonempty and of equal length");
    double total = 0.0;
    for (std::size_t j = 0; j < pmf.size(); ++j) {
        if (!(pmf[j] > 0.0))
            throw std::invalid_argument("zero-probability support point at index " + std::to_string(j));
        total += pmf[j];
    }
    check_total_mass(total);
    return enumerate_identity(support, pmf);
}

IdentityCheck eq2_identity_check(const JointPmf& joint, const std::function<double(std::span<const double>)>& g) {
    if (joint.axes.empty()) throw std::invalid_argument("joint pmf has no axes");
    std::size_t cells = 1;
    for (const auto& axis : joint.axes) {
        if (axis.empty()) throw std::invalid_argument("joint pmf axis is empty");
        if (cells > kMaxJointSupport / axis.size())
            throw std::invalid_argument("support too large for enumeration (> 1e6 points)");
        cells *= axis.size();
    }
    if (joint.probabilities.size() != cells) throw std::invalid_argument("probability table size mismatch");

    std::vector<double> values, masses;
    std::vector<double> point(joint.axes.size());
    std::vector<std::size_t> idx(joint.axes.size(), 0);
    double total = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
        const double p = joint.probabilities[c];
        if (p < 0.0 || !std::isfinite(p)) throw std::invalid_argument("joint pmf has an invalid mass");
        if (p > 0.0) {
            for (std::size_t a = 0; a < idx.size(); ++a) point[a] = joint.axes[a][idx[a]];
            values.push_back(g(point));
            masses.push_back(p);
            total += p;
        }
        for (std::size_t a = idx.size(); a-- > 0;) {
            if (++idx[a] < joint.axes[a].size()) break;
            idx[a] = 0;
        }
    }
    if (values.empty()) throw std::invalid_argument("joint pmf has empty support");
    check_total_mass(total);
    return enumerate_identity(values, masses);
}

}  // namespace densum
