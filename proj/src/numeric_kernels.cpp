#include "densum/numeric_kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace densum {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Thread-safe log-gamma for positive arguments (std::lgamma writes signgam).
double lgamma_pos(double x) {
#if defined(__GLIBC__)
    int sign = 0;
    return ::lgamma_r(x, &sign);
#else
    return std::lgamma(x);
#endif
}

// Wichura AS241 (PPND16), lower-tail branch only: p <= 0.5.
double as241_lower(double p) {
    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r +
                    45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
                 133.14166789178437745) * r + 3.387132872796366608) /
               (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r +
                    21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
                 42.313330701600911252) * r + 1.0);
    }
    double r = std::sqrt(-std::log(p));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                   1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
                4.6303378461565452959) * r + 1.42343711074968357734) /
              (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                   0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
                2.05319162663775882187) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                   0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
                5.4637849111641143699) * r + 6.6579046435011037772) /
              (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                   7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
                0.59983220655588793769) * r + 1.0);
    }
    return -val;
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 100000; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw ConvergenceError("incomplete beta continued fraction did not converge");
}

void check_beta_params(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
        throw std::invalid_argument("beta parameters must be finite and positive");
}

void check_truncnorm(double mu, double sigma, double lo, double hi) {
    if (!std::isfinite(mu) || !(sigma > 0.0) || !std::isfinite(sigma))
        throw std::invalid_argument("truncated normal needs finite mu and sigma > 0");
    if (std::isnan(lo) || std::isnan(hi) || !(lo < hi))
        throw std::invalid_argument("degenerate truncation interval");
}

// Mass of the standardized interval [za, zb], computed on the side that
// avoids cancellation.
struct TruncMass {
    bool upper;  // use survival functions
    double a;    // Phi(za) or S(za)
    double b;    // Phi(zb) or S(zb)
    double z() const { return upper ? a - b : b - a; }
};

TruncMass trunc_mass(double za, double zb) {
    if (za > 0.0) return {true, std_normal_sf(za), std_normal_sf(zb)};
    return {false, std_normal_cdf(za), std_normal_cdf(zb)};
}

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t mix_gamma(std::uint64_t z) noexcept {
    z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
    z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
    z = (z ^ (z >> 33)) | 1ULL;
    if (std::popcount(z ^ (z >> 1)) < 24) z ^= 0xaaaaaaaaaaaaaaaaULL;
    return z;
}

}  // namespace

double std_normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x * kInvSqrt2); }

double std_normal_sf(double x) noexcept { return 0.5 * std::erfc(x * kInvSqrt2); }

double std_normal_pdf(double x) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal quantile needs p in (0, 1)");
    // 1 - p is exact for p >= 0.5, so reflect and work in the lower tail.
    const bool reflect = p > 0.5;
    const double q = reflect ? 1.0 - p : p;
    double x = as241_lower(q);
    const double dens = std_normal_pdf(x);
    if (dens > 0.0) {
        const double u = (std_normal_cdf(x) - q) / dens;
        x -= u / (1.0 + 0.5 * x * u);
    }
    return reflect ? -x : x;
}

double log_beta(double a, double b) {
    check_beta_params(a, b);
    return lgamma_pos(a) + lgamma_pos(b) - lgamma_pos(a + b);
}

double incomplete_beta(double a, double b, double x) {
    check_beta_params(a, b);
    if (std::isnan(x)) throw std::invalid_argument("incomplete beta argument is NaN");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lfront = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    const double front = std::exp(lfront);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double beta_pdf(double a, double b, double x) {
    check_beta_params(a, b);
    if (x < 0.0 || x > 1.0) return 0.0;
    if (x == 0.0) return a < 1.0 ? std::numeric_limits<double>::infinity() : (a == 1.0 ? b : 0.0);
    if (x == 1.0) return b < 1.0 ? std::numeric_limits<double>::infinity() : (b == 1.0 ? a : 0.0);
    return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_beta(a, b));
}

double beta_quantile(double a, double b, double p) {
    check_beta_params(a, b);
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("beta quantile needs p in (0, 1)");
    if (a == 1.0 && b == 1.0) return p;

    // Starting value (Abramowitz-Stegun 26.5.22 for a, b >= 1; tail power laws otherwise).
    double x;
    if (a >= 1.0 && b >= 1.0) {
        const double pp = p < 0.5 ? p : 1.0 - p;
        const double t = std::sqrt(-2.0 * std::log(pp));
        double z = (2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t;
        if (p < 0.5) z = -z;
        const double al = (z * z - 3.0) / 6.0;
        const double h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
        const double w = (z * std::sqrt(al + h) / h) -
                         (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
        x = a / (a + b * std::exp(2.0 * w));
    } else {
        const double lna = std::log(a / (a + b)), lnb = std::log(b / (a + b));
        const double t = std::exp(a * lna) / a;
        const double u = std::exp(b * lnb) / b;
        const double w = t + u;
        x = p < t / w ? std::pow(a * w * p, 1.0 / a) : 1.0 - std::pow(b * w * (1.0 - p), 1.0 / b);
    }

    double lo = 0.0, hi = 1.0;
    if (!(x > 0.0 && x < 1.0)) x = 0.5;
    for (int it = 0; it < 300; ++it) {
        const double f = incomplete_beta(a, b, x) - p;
        if (f == 0.0) return x;
        (f < 0.0 ? lo : hi) = x;
        const double dens = beta_pdf(a, b, x);
        double next = (dens > 0.0 && std::isfinite(dens)) ? x - f / dens : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(x, 1e-300) ||
            hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * hi)
            return next;
        x = next;
    }
    throw ConvergenceError("beta quantile did not converge");
}

double truncnorm_cdf(double mu, double sigma, double lo, double hi, double x) {
    check_truncnorm(mu, sigma, lo, hi);
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    const double za = (lo - mu) / sigma, zb = (hi - mu) / sigma, z = (x - mu) / sigma;
    const TruncMass m = trunc_mass(za, zb);
    if (!(m.z() > 0.0)) throw std::domain_error("truncation interval has negligible normal mass");
    if (m.upper) return (m.a - std_normal_sf(z)) / m.z();
    return (std_normal_cdf(z) - m.a) / m.z();
}

double truncnorm_quantile(double mu, double sigma, double lo, double hi, double p) {
    check_truncnorm(mu, sigma, lo, hi);
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("truncated normal quantile needs p in (0, 1)");
    const double za = (lo - mu) / sigma, zb = (hi - mu) / sigma;
    const TruncMass m = trunc_mass(za, zb);
    const double mass = m.z();
    if (!(mass > 0.0)) throw std::domain_error("truncation interval has negligible normal mass");

    double z;
    if (m.upper) {
        const double t = m.a - p * mass;  // survival target
        z = t > 0.0 ? -std_normal_quantile(std::min(t, 1.0 - 1e-16)) : zb;
    } else {
        const double t = m.a + p * mass;
        z = t > 0.0 && t < 1.0 ? std_normal_quantile(t) : (t <= 0.0 ? za : zb);
    }
    z = std::clamp(z, za, zb);
    // Newton polish on the forward function.
    for (int it = 0; it < 3; ++it) {
        const double dens = std_normal_pdf(z) / mass;
        if (!(dens > 0.0)) break;
        const double f = m.upper ? (m.a - std_normal_sf(z)) / mass - p : (std_normal_cdf(z) - m.a) / mass - p;
        const double step = f / dens;
        z = std::clamp(z - step, za, zb);
        if (std::fabs(step) < 1e-15 * std::max(1.0, std::fabs(z))) break;
    }
    return std::clamp(mu + sigma * z, lo, hi);
}

double truncnorm_mean(double mu, double sigma, double lo, double hi) {
    check_truncnorm(mu, sigma, lo, hi);
    const double za = (lo - mu) / sigma, zb = (hi - mu) / sigma;
    const double mass = trunc_mass(za, zb).z();
    return mu + sigma * (std_normal_pdf(za) - std_normal_pdf(zb)) / mass;
}

double truncnorm_variance(double mu, double sigma, double lo, double hi) {
    check_truncnorm(mu, sigma, lo, hi);
    const double za = (lo - mu) / sigma, zb = (hi - mu) / sigma;
    const double mass = trunc_mass(za, zb).z();
    const double pa = std_normal_pdf(za), pb = std_normal_pdf(zb);
    const double ta = std::isfinite(za) ? za * pa : 0.0;
    const double tb = std::isfinite(zb) ? zb * pb : 0.0;
    const double r = (pa - pb) / mass;
    return sigma * sigma * (1.0 + (ta - tb) / mass - r * r);
}

CorrelationMatrix::CorrelationMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0) throw std::invalid_argument("correlation matrix must be square and nonempty");
    if (!m_.allFinite()) throw std::invalid_argument("correlation matrix has non-finite entries");
    for (Eigen::Index i = 0; i < m_.rows(); ++i) {
        if (std::fabs(m_(i, i) - 1.0) > 1e-12) throw std::invalid_argument("correlation matrix diagonal must be 1");
        for (Eigen::Index j = 0; j < i; ++j) {
            if (std::fabs(m_(i, j) - m_(j, i)) > 1e-12)
                throw std::invalid_argument("correlation matrix is not symmetric");
        }
    }
}

Matrix cholesky(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("cholesky needs a square matrix");
    if (!a.allFinite()) throw std::invalid_argument("cholesky input has non-finite entries");
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefiniteError("matrix is not positive definite; repair with ensure_pd");
    return llt.matrixL();
}

Matrix cholesky(const CorrelationMatrix& a) { return cholesky(a.matrix()); }

Matrix cholesky_semidefinite(const Matrix& a, double tol) {
    if (a.rows() != a.cols()) throw std::invalid_argument("cholesky needs a square matrix");
    const Eigen::Index n = a.rows();
    Matrix l = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double scale = std::max(1.0, std::fabs(a(j, j)));
        const double d = a(j, j) - l.row(j).head(j).squaredNorm();
        if (d < -tol * scale) throw NotPositiveDefiniteError("matrix is not positive semidefinite");
        if (d <= tol * scale) {
            for (Eigen::Index i = j + 1; i < n; ++i) {
                const double v = a(i, j) - l.row(i).head(j).dot(l.row(j).head(j));
                if (std::fabs(v) > std::sqrt(tol) * scale)
                    throw NotPositiveDefiniteError("matrix is not positive semidefinite");
            }
            continue;
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (Eigen::Index i = j + 1; i < n; ++i)
            l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
    }
    return l;
}

PdRepair ensure_pd(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("ensure_pd needs a square matrix");
    if (a.size() > 0 && (a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("ensure_pd needs a symmetric matrix");
    static constexpr double grid[] = {0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    const Eigen::Index n = a.rows();
    for (const double lambda : grid) {
        Matrix candidate = (1.0 - lambda) * a + lambda * Matrix::Identity(n, n);
        candidate.diagonal().setOnes();
        Eigen::LLT<Matrix> llt(candidate);
        if (llt.info() == Eigen::Success)
            return PdRepair{CorrelationMatrix(std::move(candidate)), lambda, lambda > 0.0};
    }
    return PdRepair{CorrelationMatrix(Matrix::Identity(n, n)), 1.0, true};
}

SeededStream::SeededStream(std::uint64_t master_seed, std::uint64_t stream_index) noexcept {
    const std::uint64_t s = mix64(master_seed + 0x9e3779b97f4a7c15ULL);
    key_ = mix64(s ^ mix64(stream_index + 0x632be59bd9b4e019ULL));
    gamma_ = mix_gamma(key_ + 0xd1b54a32d192ed03ULL);
}

std::uint64_t SeededStream::next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * gamma_);
}

double SeededStream::next_uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double SeededStream::next_normal() { return std_normal_quantile(next_uniform()); }

SeededStream seeded_stream(std::uint64_t master_seed, std::uint64_t stream_index) noexcept {
    return SeededStream(master_seed, stream_index);
}

}  // namespace densum
