#include "mklrate/diagnostics.hpp"
#include "mklrate/errors.hpp"
#include "mklrate/synthetic_model.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace mklrate;

namespace {

const SpectralKernel& default_kernel() {
    static const SpectralKernel k = SpectralKernel::power_law(0.5, 128);
    return k;
}

}  // namespace

TEST(BuildTruth, HomogeneousMixedNorms) {
    const auto t = build_truth(default_kernel(), 5, 3, 0.0, NormProfile::Homogeneous);
    EXPECT_NEAR(mixed_norm(t, default_kernel(), 2.0), std::sqrt(3.0), 1e-12);
    EXPECT_NEAR(mixed_norm(t, default_kernel(), std::numeric_limits<double>::infinity()), 1.0, 1e-12);
}

TEST(BuildTruth, InhomogeneousMixedNorms) {
    const auto t = build_truth(default_kernel(), 5, 3, 0.0, NormProfile::Inhomogeneous);
    EXPECT_NEAR(mixed_norm(t, default_kernel(), std::numeric_limits<double>::infinity()), 1.0, 1e-12);
    EXPECT_NEAR(mixed_norm(t, default_kernel(), 2.0), std::sqrt(1.0 + 0.25 + 1.0 / 9.0), 1e-12);
    EXPECT_NEAR(mixed_norm(t, default_kernel(), 2.0), 1.1667, 1e-4);
    for (int r = 1; r <= 3; ++r) EXPECT_NEAR(t.g_rkhs_norm(default_kernel(), r), 1.0 / r, 1e-12);
}

TEST(BuildTruth, CoefficientShapeAndSmoothness) {
    const auto& k = default_kernel();
    const auto t = build_truth(k, 4, 2, 0.6, NormProfile::Homogeneous);
    ASSERT_EQ(t.active_set, (std::vector<int>{0, 1}));
    const auto& g = t.g_coefficients[0];
    const auto& f = t.f_coefficients[0];
    ASSERT_EQ(g.size(), 128u);
    for (int i = 1; i <= 128; ++i) {
        const auto idx = static_cast<std::size_t>(i - 1);
        EXPECT_NEAR(f[idx], std::pow(k.eigenvalue(i), 0.3) * g[idx], 1e-15);
        // b_k proportional to sigma_k mu_k^{1/2} / k
        const double shape = std::sqrt(k.eigenvalue(i)) / i;
        EXPECT_NEAR(std::abs(g[idx]) / shape, std::abs(g[0]) / std::sqrt(k.eigenvalue(1)), 1e-12);
        if (i > 1) EXPECT_LT(g[idx] * g[idx - 1], 0.0);
    }
    EXPECT_LE(t.f_rkhs_norm(k, 1), t.g_rkhs_norm(k, 1) + 1e-15);
    const auto inactive = t.f_component(3, 128);
    for (double v : inactive) EXPECT_EQ(v, 0.0);
}

TEST(BuildTruth, Preconditions) {
    const auto& k = default_kernel();
    EXPECT_THROW(build_truth(k, 3, 4, 0.0, NormProfile::Homogeneous), ParameterError);
    EXPECT_THROW(build_truth(k, 3, 0, 0.0, NormProfile::Homogeneous), ParameterError);
    EXPECT_THROW(build_truth(k, 3, 1, 1.5, NormProfile::Homogeneous), ParameterError);
    const auto full = build_truth(k, 3, 3, 0.0, NormProfile::Homogeneous);
    EXPECT_EQ(full.active_set, (std::vector<int>{0, 1, 2}));
}

TEST(BuildTruth, SmoothnessOrdering) {
    const auto& k = default_kernel();
    double prev_norm = std::numeric_limits<double>::infinity();
    double prev_tail = std::numeric_limits<double>::infinity();
    for (double q : {0.0, 0.25, 0.5, 1.0}) {
        const auto t = build_truth(k, 2, 1, q, NormProfile::Homogeneous);
        const double norm = t.f_rkhs_norm(k, 1);
        double tail = 0.0;
        for (std::size_t i = 64; i < 128; ++i) tail += t.f_coefficients[0][i] * t.f_coefficients[0][i];
        EXPECT_LE(norm, prev_norm);
        EXPECT_LE(tail, prev_tail);
        prev_norm = norm;
        prev_tail = tail;
    }
}

TEST(SampleData, NoiselessLabelsMatchTruth) {
    const auto& k = default_kernel();
    const auto t = build_truth(k, 3, 2, 0.0, NormProfile::Homogeneous, 0.0);
    const auto s = sample_data(t, k, 50, NoiseKind::Uniform, 4);
    EXPECT_EQ(s.noise.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((s.labels - evaluate_truth(t, k, s.inputs)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SampleData, BoundedNoiseAndLabelReconstruction) {
    const auto& k = default_kernel();
    for (auto kind : {NoiseKind::Uniform, NoiseKind::Rademacher}) {
        const auto t = build_truth(k, 3, 2, 0.5, NormProfile::Inhomogeneous, 0.3);
        const auto s = sample_data(t, k, 400, kind, 99);
        EXPECT_LE(s.noise.cwiseAbs().maxCoeff(), 0.3);
        EXPECT_GE(s.inputs.minCoeff(), 0.0);
        EXPECT_LT(s.inputs.maxCoeff(), 1.0);
        EXPECT_LE((s.labels - evaluate_truth(t, k, s.inputs) - s.noise).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(SampleData, SameSeedIsBitwiseIdentical) {
    const auto& k = default_kernel();
    const auto t = build_truth(k, 4, 2, 0.0, NormProfile::Homogeneous);
    const auto a = sample_data(t, k, 100, NoiseKind::Uniform, 1234);
    const auto b = sample_data(t, k, 100, NoiseKind::Uniform, 1234);
    const auto c = sample_data(t, k, 100, NoiseKind::Uniform, 1235);
    EXPECT_TRUE(a.inputs == b.inputs);
    EXPECT_TRUE(a.labels == b.labels);
    EXPECT_FALSE(a.inputs == c.inputs);
}

TEST(SampleData, LabelsAreCentred) {
    const auto& k = default_kernel();
    const auto t = build_truth(k, 1, 1, 0.0, NormProfile::Homogeneous);
    const int n = 10000;
    const auto s = sample_data(t, k, n, NoiseKind::Uniform, 77);
    const double mean = s.labels.mean();
    const double sd = std::sqrt((s.labels.array() - mean).square().sum() / (n - 1));
    EXPECT_LE(std::abs(mean), 4.0 * sd / std::sqrt(n));
}

TEST(SampleData, ParsevalAgainstMonteCarlo) {
    const auto& k = default_kernel();
    const auto t = build_truth(k, 1, 1, 0.0, NormProfile::Homogeneous, 0.0);
    const int n = 100000;
    const auto s = sample_data(t, k, n, NoiseKind::Uniform, 5);
    const Eigen::ArrayXd sq = s.labels.array().square();
    const double mean = sq.mean();
    const double se = std::sqrt((sq - mean).square().sum() / (n - 1) / n);
    EXPECT_LE(std::abs(mean - t.f_l2_norm_sq()), 3.0 * se);
}

TEST(SampleData, ComponentsAreEmpiricallyOrthogonal) {
    const auto& k = default_kernel();
    const auto t = build_truth(k, 2, 2, 0.0, NormProfile::Homogeneous, 0.0);
    const int n = 10000;
    const Eigen::MatrixXd x = oracle::uniform_inputs(n, 2, 31);
    TruthModel only0 = t;
    only0.f_coefficients[1].assign(128, 0.0);
    TruthModel only1 = t;
    only1.f_coefficients[0].assign(128, 0.0);
    const Eigen::VectorXd f0 = evaluate_truth(only0, k, x);
    const Eigen::VectorXd f1 = evaluate_truth(only1, k, x);
    const double ip = f0.dot(f1) / n;
    const double bound = 4.0 / std::sqrt(n) * std::sqrt(l2_norm_sq(t.f_coefficients[0]) * l2_norm_sq(t.f_coefficients[1]));
    EXPECT_LE(std::abs(ip), bound);
}

TEST(EvaluateTruth, ZeroTruthAndOneTerm) {
    const auto k = SpectralKernel::power_law(0.5, 8);
    auto t = build_truth(k, 2, 1, 0.5, NormProfile::Homogeneous);
    const std::vector<double> x{0.37, 0.81};
    t.f_coefficients[0].assign(8, 0.0);
    EXPECT_EQ(evaluate_truth(t, k, x), 0.0);
    const double b = 0.7;
    t.g_coefficients[0].assign(8, 0.0);
    t.g_coefficients[0][0] = b;
    t.f_coefficients[0] = apply_operator_power(k, t.g_coefficients[0], 0.25);
    EXPECT_NEAR(evaluate_truth(t, k, x), std::pow(k.eigenvalue(1), 0.25) * b * std::sqrt(2.0) * std::cos(std::numbers::pi * 0.37),
                1e-15);
    EXPECT_THROW(evaluate_truth(t, k, std::vector<double>{1.2, 0.1}), DomainError);
}

TEST(EvaluateTruth, TensorQuadratureMatchesCoefficients) {
    const auto k = SpectralKernel::power_law(0.5, 32);
    const auto t = build_truth(k, 2, 2, 0.0, NormProfile::Inhomogeneous);
    const int g = 80;
    double acc = 0.0;
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            const double v = evaluate_truth(t, k, std::vector<double>{(i + 0.5) / g, (j + 0.5) / g});
            acc += v * v;
        }
    acc /= g * g;
    EXPECT_NEAR(acc, t.f_l2_norm_sq(), 1e-12);
}

TEST(Serialisation, TruthAndSampleJson) {
    const auto k = SpectralKernel::power_law(0.5, 8);
    const auto t = build_truth(k, 3, 2, 0.5, NormProfile::Inhomogeneous);
    const auto j = to_json(t);
    EXPECT_EQ(j.at("profile"), "inhomogeneous");
    EXPECT_EQ(j.at("active_set").size(), 2u);
    const auto s = sample_data(t, k, 4, NoiseKind::Uniform, 9);
    const auto js = to_json(s);
    EXPECT_EQ(js.at("labels").size(), 4u);
}
