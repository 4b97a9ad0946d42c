#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "densum/variance_identity.hpp"

using namespace densum;

namespace {

Matrix chain_cov() {
    Matrix s(3, 3);
    s << 1, .5, 0, .5, 1, .5, 0, .5, 1;
    return s;
}

// Random PSD covariance with a random sparsity pattern so mu varies.
Matrix random_psd(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    std::bernoulli_distribution keep(0.3);
    const auto k = static_cast<Eigen::Index>(1 + rng() % n);
    Matrix a(static_cast<Eigen::Index>(n), k);
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < k; ++j) a(i, j) = keep(rng) ? z(rng) : 0.0;
    Matrix s = a * a.transpose();
    s.diagonal().array() += 0.1;
    return s;
}

}  // namespace

TEST(AdditiveVariance, ChainExample) {
    const std::vector<double> w{1, 1, 1}, var{1, 1, 1};
    const DependencySummary dep{4.0 / 3.0, 0.5, 0.5};
    const VarianceDecomposition d = additive_variance(w, var, dep);
    EXPECT_NEAR(d.total(0, 0), 5.0, 1e-14);
    const Vector wv = Vector::Ones(3);
    EXPECT_NEAR(d.total(0, 0), wv.dot(chain_cov() * wv), 1e-14);
    EXPECT_NEAR(additive_variance(w, var, dep, SummaryRoute::phi).total(0, 0), 5.0, 1e-14);
}

TEST(AdditiveVariance, IndependenceAndCopies) {
    const std::vector<double> w{0.5, 2.0, -1.0}, var{1.0, 3.0, 0.5};
    const VarianceDecomposition d = additive_variance(w, var, DependencySummary{});
    EXPECT_NEAR(d.total(0, 0), 0.25 + 12.0 + 0.5, 1e-14);

    const std::size_t n = 7;
    const double sigma2 = 2.5;
    const std::vector<double> ones(n, 1.0), vars(n, sigma2);
    const DependencySummary copies{static_cast<double>(n - 1), 1.0, sigma2};
    EXPECT_NEAR(additive_variance(ones, vars, copies, SummaryRoute::phi).total(0, 0), n * n * sigma2, 1e-12);
    EXPECT_NEAR(additive_variance(ones, vars, copies).total(0, 0), n * n * sigma2, 1e-12);
}

TEST(AdditiveVariance, RejectsNegativeVariance) {
    const std::vector<double> w{1, 1}, bad{1, -1};
    EXPECT_THROW((void)additive_variance(w, bad, DependencySummary{}), std::invalid_argument);
    const std::vector<double> var{1, 1};
    EXPECT_THROW((void)additive_variance(w, var, DependencySummary{1.0, -2.0, 0.0}, SummaryRoute::phi),
                 std::domain_error);
}

TEST(SummariesFromCovariance, Examples) {
    const std::vector<double> w{1, 1, 1};
    const DependencySummary id = summaries_from_covariance(Matrix::Identity(3, 3), w);
    EXPECT_EQ(id.mu, 0.0);
    EXPECT_EQ(id.sigma_bar, 0.0);
    EXPECT_EQ(id.phi, 0.0);

    const DependencySummary chain = summaries_from_covariance(chain_cov(), w);
    EXPECT_NEAR(chain.mu, 4.0 / 3.0, 1e-15);
    EXPECT_NEAR(chain.sigma_bar, 0.5, 1e-15);
    EXPECT_NEAR(chain.phi, 0.5, 1e-15);

    const DependencySummary full = summaries_from_covariance(Matrix::Ones(3, 3), w);
    EXPECT_NEAR(full.mu, 2.0, 1e-15);
    EXPECT_NEAR(full.phi, 1.0, 1e-15);
}

TEST(SummariesFromCovariance, DegreesOfChain) {
    const RowPairDependency dep = row_pair_summaries(chain_cov(), WeightMatrix(Matrix::Ones(1, 3)));
    EXPECT_EQ(dep.edges, 2u);
    EXPECT_EQ(dep.degrees, (std::vector<std::size_t>{1, 2, 1}));
}

TEST(SummariesFromCovariance, FloatNoiseIsNotAnEdge) {
    Matrix s = Matrix::Identity(4, 4);
    s(0, 1) = s(1, 0) = 1e-14;
    EXPECT_EQ(summaries_from_covariance(s, std::vector<double>(4, 1.0)).mu, 0.0);
}

TEST(VarianceIdentity, ExactnessHandshakeAndBounds) {
    std::mt19937_64 rng(1234);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 49;
        const Matrix s = random_psd(n, rng);
        Matrix wm(2, static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < wm.size(); ++i) wm.data()[i] = z(rng);
        const Vector var = s.diagonal();
        const std::span<const double> vs(var.data(), n);

        const RowPairDependency rp = row_pair_summaries(s, WeightMatrix(wm));
        std::size_t degree_sum = 0;
        for (const auto d : rp.degrees) degree_sum += d;
        EXPECT_EQ(degree_sum, 2 * rp.edges);

        const Matrix brute = wm * s * wm.transpose();
        const VarianceDecomposition by_c =
            additive_variance(WeightMatrix(wm), vs, rp.mu, AverageCovariance{rp.sigma_bar});
        EXPECT_LE((by_c.total - brute).cwiseAbs().maxCoeff(), 1e-10 * brute.cwiseAbs().maxCoeff());

        for (Eigen::Index r = 0; r < 2; ++r) {
            const Vector w = wm.row(r).transpose();
            const std::span<const double> ws(w.data(), n);
            const DependencySummary dep = summaries_from_covariance(s, ws);
            const double exact = w.dot(s * w);
            EXPECT_NEAR(additive_variance(ws, vs, dep).total(0, 0), exact, 1e-10 * std::fabs(exact));
            if (dep.mu > 0.0 && std::fabs(dep.sigma_bar) > 0.0) {
                EXPECT_NEAR(additive_variance(ws, vs, dep, SummaryRoute::phi).total(0, 0), exact,
                            1e-10 * std::fabs(exact));
            }
        }

        const std::vector<double> ones(n, 1.0);
        const DependencySummary unweighted = summaries_from_covariance(s, ones);
        if (unweighted.mu > 0.0) {
            EXPECT_TRUE(phi_within_bounds(unweighted, n, ones, 1e-12));
            EXPECT_TRUE(phi_bounds(unweighted.mu, n).contains(unweighted.phi, 1e-12));
            if (unweighted.sigma_bar >= 0.0) {
                const double total = Vector::Ones(static_cast<Eigen::Index>(n)).dot(s * Vector::Ones(
                                                                                          static_cast<Eigen::Index>(n)));
                EXPECT_LE(total, eta_bound(vs, unweighted.mu).bound * (1 + 1e-12));
            }
        }
    }
}

TEST(PhiBounds, Examples) {
    const Interval a = phi_bounds(4, 5);
    EXPECT_DOUBLE_EQ(a.lower, -0.25);
    EXPECT_DOUBLE_EQ(a.upper, 1.0);
    const Interval b = phi_bounds(2, 5);
    EXPECT_DOUBLE_EQ(b.lower, -0.5);
    EXPECT_DOUBLE_EQ(b.upper, 2.0);
    const Interval c = phi_bounds(1, 2);
    EXPECT_DOUBLE_EQ(c.lower, -1.0);
    EXPECT_DOUBLE_EQ(c.upper, 1.0);
    EXPECT_THROW((void)phi_bounds(0.0, 5), std::domain_error);
}

TEST(PhiBounds, WeightedRequestIsUnsupported) {
    const std::vector<double> w{1.0, 2.0, 1.0};
    EXPECT_THROW((void)phi_within_bounds(DependencySummary{1.0, 0.5, 0.5}, 3, w), std::domain_error);
}

TEST(EtaBound, Examples) {
    const std::vector<double> a{1, 2, 3}, b{1, 1, 4}, eq{2, 2, 2, 2};
    EXPECT_DOUBLE_EQ(eta_bound(a, 1.0).eta, 1.5);
    EXPECT_DOUBLE_EQ(eta_bound(b, 1.0).eta, 2.0);
    const EtaBound e = eta_bound(eq, 3.0);
    EXPECT_DOUBLE_EQ(e.eta, 1.0);
    EXPECT_DOUBLE_EQ(e.bound, 4.0 * 8.0);
}

TEST(ClusterIdentity, Examples) {
    const std::vector<Matrix> vars{Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 1.0)};
    EXPECT_DOUBLE_EQ(cluster_variance_identity(vars, 0.0, Matrix::Zero(1, 1)).total(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(cluster_variance_identity(vars, 1.0, Matrix::Constant(1, 1, 0.5)).total(0, 0), 3.0);
    EXPECT_NEAR(cluster_variance_identity(vars, 1.0, Matrix::Constant(1, 1, -1.0)).total(0, 0), 0.0, 1e-15);
}

TEST(ClusterIdentity, MatchesQuadraticForm) {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 4 + rng() % 40;
        const Matrix s = random_psd(n, rng);
        Matrix wm(1, static_cast<Eigen::Index>(n));
        for (Eigen::Index i = 0; i < wm.size(); ++i) wm.data()[i] = z(rng);
        const Partition part = sequential_partition(n, 1 + rng() % (n / 2));
        const ClusterVarianceSummary c = cluster_summaries_from_covariance(s, WeightMatrix(wm), part);
        const double brute = (wm * s * wm.transpose())(0, 0);
        EXPECT_NEAR(c.total(0, 0), brute, 1e-10 * std::max(1.0, std::fabs(brute)));
        const auto recomputed = cluster_variance_identity(c.cluster_variances, c.mu_t, c.sigma_bar_t);
        EXPECT_NEAR(recomputed.total(0, 0), brute, 1e-10 * std::max(1.0, std::fabs(brute)));
    }
}
