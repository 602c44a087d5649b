#include "mklrate/diagnostics.hpp"
#include "mklrate/errors.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace mklrate;

namespace {

GramSet duplicated(const GramSet& g, std::size_t m) {
    std::vector<GramBlock> blocks{g.block(m), g.block(m)};
    return GramSet(std::move(blocks), g.samples());
}

}  // namespace

TEST(Kappa, SingletonIsOne) {
    const GramSet g = oracle::random_gram(50, 3, 1);
    EXPECT_EQ(empirical_kappa_min(g, {1}), 1.0);
}

TEST(Kappa, DuplicatedKernelCancels) {
    const GramSet g = duplicated(oracle::random_gram(50, 1, 2), 0);
    EXPECT_NEAR(empirical_kappa_min(g, {0, 1}), 0.0, 1e-12);
}

TEST(Kappa, ProductDesignIsNearlyIncoherent) {
    const GramSet g = oracle::random_gram(512, 2, 20110214, 4);
    const double k = empirical_kappa_min(g, {0, 1});
    EXPECT_GE(k, 0.8);
    EXPECT_LE(k, 1.0);
}

TEST(Kappa, MatchesGeneralisedEigenvalueOracle) {
    // Smallest eigenvalue of the Gram of the stacked orthonormal range bases.
    const GramSet g = oracle::random_gram(60, 3, 5, 5);
    Eigen::MatrixXd u(60, 15);
    for (int m = 0; m < 3; ++m) u.middleCols(5 * m, 5) = g.block(static_cast<std::size_t>(m)).eigenvectors;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(u.transpose() * u);
    EXPECT_NEAR(empirical_kappa_min(g, {0, 1, 2}), es.eigenvalues().minCoeff(), 1e-10);
}

TEST(Kappa, BadIndexSets) {
    const GramSet g = oracle::random_gram(20, 3, 1);
    EXPECT_THROW(empirical_kappa_min(g, {}), ParameterError);
    EXPECT_THROW(empirical_kappa_min(g, {3}), ParameterError);
    EXPECT_THROW(empirical_kappa_min(g, {0, 0}), ParameterError);
}

TEST(Rho, ZeroGramComplement) {
    const GramSet base = oracle::random_gram(30, 1, 3);
    std::vector<GramBlock> blocks{base.block(0), factorize_gram(Eigen::MatrixXd::Zero(30, 30))};
    const GramSet g(std::move(blocks), Eigen::MatrixXd::Zero(30, 2));
    EXPECT_EQ(empirical_rho(g, {0}), 0.0);
}

TEST(Rho, DuplicateAcrossSplitIsOne) {
    const GramSet g = duplicated(oracle::random_gram(30, 1, 4), 0);
    EXPECT_NEAR(empirical_rho(g, {0}), 1.0, 1e-12);
    EXPECT_LE(empirical_rho(g, {0}), 1.0);
}

TEST(Rho, ProductDesignIsSmall) {
    const GramSet g = oracle::random_gram(512, 4, 20110214, 4);
    const double r = empirical_rho(g, {0, 1});
    EXPECT_LE(r, 0.5);
    EXPECT_GE(r, 0.0);
    EXPECT_THROW(empirical_rho(g, {0, 1, 2, 3}), ParameterError);
}

TEST(Rho, MatchesPrincipalAngleOracle) {
    const GramSet g = oracle::random_gram(40, 3, 9, 3);
    Eigen::MatrixXd a(40, 3);
    a = g.block(0).eigenvectors;
    Eigen::MatrixXd b(40, 6);
    b << g.block(1).eigenvectors, g.block(2).eigenvectors;
    const Eigen::MatrixXd qb = b.householderQr().householderQ() * Eigen::MatrixXd::Identity(40, 6);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a.transpose() * qb);
    EXPECT_NEAR(empirical_rho(g, {0}), svd.singularValues()[0], 1e-10);
}

TEST(IncoherenceBound, TrivialSlacks) {
    EXPECT_EQ(lemma1_slack(Eigen::MatrixXd::Zero(10, 3), {0}, 0.7, 0.2), 0.0);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(10, 3);
    c.col(0) = Eigen::VectorXd::LinSpaced(10, -1.0, 2.0);
    EXPECT_GE(lemma1_slack(c, {0}, 0.9, 0.3), 0.0);
}

TEST(IncoherenceBound, RandomDrawsRespectBound) {
    const GramSet g = oracle::random_gram(128, 4, 21, 8);
    const auto check = check_lemma1(g, {0, 1}, 200, 5);
    EXPECT_GE(check.min_relative_slack, -1e-8);
    EXPECT_GT(check.kappa_min, 0.0);
    EXPECT_LT(check.rho, 1.0);
    EXPECT_THROW(check_lemma1(g, {0}, 0, 1), ParameterError);
}

TEST(MixedNorm, Ordering) {
    const auto k = SpectralKernel::power_law(0.5, 32);
    for (auto p : {NormProfile::Homogeneous, NormProfile::Inhomogeneous}) {
        const auto t = build_truth(k, 6, 4, 0.5, p);
        const double inf = std::numeric_limits<double>::infinity();
        EXPECT_GE(mixed_norm(t, k, 1.0), mixed_norm(t, k, 2.0));
        EXPECT_GE(mixed_norm(t, k, 2.0), mixed_norm(t, k, inf));
    }
    EXPECT_THROW(mixed_norm(build_truth(k, 2, 1, 0.0, NormProfile::Homogeneous), k, 3.0), ParameterError);
}

TEST(LambdaStar, WorkedValues) {
    EXPECT_NEAR(lambda_star(1, 1, 0.5, 0.0, 1), 1.0, 1e-15);
    EXPECT_NEAR(lambda_star(4, 1024, 0.5, 0.0, 1), std::pow(2.0, -16.0 / 3.0), 1e-15);
    EXPECT_NEAR(lambda_star(4, 1024, 0.5, 0.0, 1), 0.02480, 1e-5);
    EXPECT_LT(lambda_star(4, 2048, 0.5, 0.3, 1.2), lambda_star(4, 1024, 0.5, 0.3, 1.2));
    EXPECT_GT(lambda_star(8, 1024, 0.5, 0.3, 1.2), lambda_star(4, 1024, 0.5, 0.3, 1.2));
    EXPECT_THROW(lambda_star(0, 1024, 0.5, 0.0, 1), ParameterError);
    EXPECT_THROW(lambda_star(1, 1024, 0.5, 0.0, 0), ParameterError);
}

TEST(Exponents, WorkedValues) {
    EXPECT_NEAR(rate_exponent(0.5, 0.0), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(rate_exponent(0.5, 1.0), 0.8, 1e-15);
    EXPECT_NEAR(entropy_exponent(0.5, 0.0), 1.0, 1e-15);
    EXPECT_NEAR(entropy_exponent(0.5, 1.0), 0.5, 1e-15);
    const auto l2 = minimax_reference(0.5, 1.0, MixedNormBall::L2);
    const auto linf = minimax_reference(0.5, 1.0, MixedNormBall::LInf);
    EXPECT_NEAR(l2.n_exponent, 0.8, 1e-15);
    EXPECT_NEAR(l2.d_exponent, 0.8, 1e-15);
    EXPECT_EQ(linf.d_exponent, 1.0);
    EXPECT_THROW(rate_exponent(0.0, 0.5), ParameterError);
    EXPECT_THROW(entropy_exponent(0.5, -0.1), ParameterError);
}

TEST(Exponents, RateEqualsMinimaxOnGrid) {
    for (int i = 1; i <= 10; ++i)
        for (int j = 0; j < 10; ++j) {
            const double s = i / 11.0;
            const double q = j / 9.0;
            EXPECT_NEAR(rate_exponent(s, q), minimax_reference(s, q, MixedNormBall::L2).n_exponent, 1e-14);
            EXPECT_NEAR(entropy_exponent(s, q), 2.0 * s / (1.0 + q), 1e-14);
        }
    EXPECT_NEAR(entropy_exponent(0.3, 0.0), 0.6, 1e-15);
}

TEST(ConditionProfile, LogFlagAndMonotonicity) {
    const auto plan = theory_plan(100, std::exp(9.0), 0.5, 0.1, 1.0);
    EXPECT_TRUE(theorem1_condition_profile(2, 100, std::exp(9.0), plan, 1.0, 0.0).log_condition);
    EXPECT_FALSE(theorem1_condition_profile(2, 100, std::exp(11.0), plan, 1.0, 0.0).log_condition);
    double prev = std::numeric_limits<double>::infinity();
    const auto fixed = theory_plan(100, 8, 0.5, 0.1, 1.0);
    for (double n : {100.0, 400.0, 1600.0, 6400.0, 25600.0}) {
        const double v = theorem1_condition_profile(2, n, 8, fixed, 1.0, 0.0).profile;
        EXPECT_LT(v, prev);
        prev = v;
    }
    const auto p = theory_plan(400, 8, 0.5, 0.05, 1.0);
    const double xi = xi_n(0.05, 400, 0.5, 8);
    EXPECT_NEAR(theorem1_condition_profile(1, 400, 8, p, 0.0, 0.0).profile, std::sqrt(400.0) * xi * xi, 1e-14);
    EXPECT_THROW(theorem1_condition_profile(1, 400, 8, RegularizationPlan{}, 1.0, 0.0), ParameterError);
}

TEST(Balance, TheoryPlanTermsAreComparable) {
    double worst = 0.0;
    for (double s : {0.3, 0.5, 0.7})
        for (double q : {0.0, 0.5, 1.0})
            for (double d : {1.0, 4.0, 16.0})
                for (double n : {1e3, 1e4, 1e5}) {
                    const double r2 = std::sqrt(d);
                    const double lb = lambda_star(d, n, s, q, r2);
                    const auto plan = theory_plan(n, 4 * d + 1, s, lb, 1.0);
                    const double sparse = d * plan.lambda1 * plan.lambda1;
                    const double smooth = std::pow(plan.lambda3, 1.0 + q) * r2 * r2;
                    const double ratio = sparse / smooth;
                    EXPECT_GE(ratio, 1.0 - 1e-12);
                    worst = std::max(worst, ratio);
                }
    EXPECT_LE(worst, 25.0);
}

TEST(Diagnose, ReportIsConsistent) {
    const auto k = SpectralKernel::power_law(0.5, 4);
    const auto t = build_truth(k, 4, 2, 0.0, NormProfile::Inhomogeneous);
    const auto s = sample_data(t, k, 256, NoiseKind::Uniform, 3);
    const std::vector<SpectralKernel> ks(4, k);
    const GramSet g = assemble_gram(ks, s.inputs);
    const auto r = diagnose(g, t, k, t.active_set);
    EXPECT_EQ(r.incoherence_product, (1.0 - r.rho * r.rho) * r.kappa_min);
    EXPECT_GT(r.incoherence_product, 0.0);
    EXPECT_NEAR(r.r_inf, 1.0, 1e-12);
    EXPECT_NEAR(r.rate_exponent, 2.0 / 3.0, 1e-15);
    const auto j = to_json(r);
    EXPECT_TRUE(j.contains("mixed_norms"));
    EXPECT_TRUE(j.contains("estimates"));
}
