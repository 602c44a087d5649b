#include "mklrate/errors.hpp"
#include "mklrate/rate_harness.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace mklrate;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.s = 0.5;
    c.q = 0.0;
    c.d = 2;
    c.M = 4;
    c.n_grid = {32, 64, 128};
    c.replications = 1;
    c.truncation = 16;
    c.seed = 4242;
    return c;
}

}  // namespace

TEST(Config, ParseRoundTrip) {
    const auto j = nlohmann::json::parse(R"({"s":0.5,"q":0.5,"d":2,"M":6,"profile":"inhomogeneous",
        "n_grid":[64,128],"replications":3,"seed":"18446744073709551615",
        "lambda_policy":{"kind":"pilot","scale":0.5,"lambda_bar_scale":0.2},
        "test_policy":{"kind":"monte_carlo","n_test":5000},"noise":"rademacher"})");
    const auto c = parse_config(j);
    EXPECT_EQ(c.seed, 18446744073709551615ULL);
    EXPECT_EQ(c.lambda_policy.kind, LambdaPolicy::Kind::Pilot);
    EXPECT_EQ(c.lambda_policy.lambda_bar_scale, 0.2);
    EXPECT_EQ(c.test_policy.n_test, 5000);
    EXPECT_EQ(c.noise, NoiseKind::Rademacher);
    EXPECT_EQ(parse_config(to_json(c)), c);
}

TEST(Config, ValidationNamesTheField) {
    auto base = nlohmann::json::parse(R"({"s":0.5,"q":0,"d":2,"M":4,"profile":"homogeneous","n_grid":[64,128]})");
    auto expect_field = [](const nlohmann::json& j, const std::string& field) {
        try {
            parse_config(j);
            ADD_FAILURE() << "accepted " << j.dump();
        } catch (const ParameterError& e) {
            EXPECT_EQ(e.field(), field);
        }
    };
    auto j = base;
    j.erase("M");
    expect_field(j, "M");
    j = base;
    j["n_grid"] = {128, 64};
    expect_field(j, "n_grid");
    j = base;
    j["d"] = 5;
    expect_field(j, "d");
    j = base;
    j["s"] = 1.0;
    expect_field(j, "s");
    j = base;
    j["replications"] = 0;
    expect_field(j, "replications");
    j = base;
    j["profile"] = "flat";
    expect_field(j, "profile");
}

TEST(Sweep, BookkeepingThreeRows) {
    const auto r = run_sweep(small_config(), 1, false);
    ASSERT_EQ(r.rows.size(), 3u);
    EXPECT_EQ(r.per_n.size(), 3u);
    EXPECT_FALSE(r.fit.has_value());
    EXPECT_NEAR(r.reference_exponent, -2.0 / 3.0, 1e-15);
    for (const auto& row : r.rows) {
        EXPECT_GE(row.err_l2sq, 0.0);
        EXPECT_FALSE(row.failed);
        EXPECT_EQ(row.seed, cell_seed(4242, row.n, row.rep));
    }
    const std::string csv = results_csv(r);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    EXPECT_EQ(csv.substr(0, csv.find('\n')),
              "n,rep,seed,s,q,d,M,profile,lambda_bar,lambda1,err_l2sq,support_ok,sweeps,runtime_ms");
}

TEST(Sweep, ReproducibleAcrossThreadCounts) {
    auto c = small_config();
    c.replications = 3;
    const auto a = run_sweep(c, 1, false);
    const auto b = run_sweep(c, 3, false);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].n, b.rows[i].n);
        EXPECT_EQ(a.rows[i].rep, b.rows[i].rep);
        EXPECT_EQ(a.rows[i].err_l2sq, b.rows[i].err_l2sq);
        EXPECT_EQ(a.rows[i].lambda1, b.rows[i].lambda1);
        EXPECT_EQ(a.rows[i].sweeps, b.rows[i].sweeps);
    }
}

TEST(Sweep, NoiselessErrorDecreases) {
    auto c = small_config();
    c.d = 1;
    c.M = 2;
    c.noise_bound = 0.0;
    c.n_grid = {64, 256, 1024};
    c.replications = 2;
    const auto r = run_sweep(c, 0, false);
    ASSERT_EQ(r.per_n.size(), 3u);
    EXPECT_LT(r.per_n[1].mean_error, r.per_n[0].mean_error);
    EXPECT_LT(r.per_n[2].mean_error, r.per_n[1].mean_error);
}

TEST(Sweep, FitPresentWithFourPoints) {
    auto c = small_config();
    c.n_grid = {32, 64, 128, 256};
    const auto r = run_sweep(c, 0, true);
    ASSERT_TRUE(r.fit.has_value());
    EXPECT_LT(r.fit->slope, 0.0);
    ASSERT_TRUE(r.diagnostics.has_value());
    const auto j = summary_json(r);
    EXPECT_TRUE(j.contains("fitted_exponent"));
    EXPECT_TRUE(j.contains("exponent_se"));
    EXPECT_TRUE(j.contains("diagnostics"));
}

TEST(ExactError, ZeroSolutionAndInterpolation) {
    const auto k = SpectralKernel::power_law(0.5, 8);
    const auto t = build_truth(k, 2, 1, 0.0, NormProfile::Homogeneous, 0.0);
    const auto s = sample_data(t, k, 40, NoiseKind::Uniform, 1);
    MklSolution zero;
    zero.alpha_blocks.assign(2, Eigen::VectorXd::Zero(40));
    EXPECT_NEAR(exact_l2_error(zero, t, k, s.inputs), t.f_l2_norm_sq(), 1e-15);

    // Coefficients that reproduce f* exactly: alpha = Phi (Phi^T Phi)^{-1} diag(1/mu) c*.
    const Eigen::MatrixXd phi = basis_matrix(k, s.inputs.col(0));
    Eigen::VectorXd c(8);
    for (int i = 0; i < 8; ++i) c[i] = t.f_coefficients[0][static_cast<std::size_t>(i)] / k.eigenvalue(i + 1);
    MklSolution exact = zero;
    exact.alpha_blocks[0] = phi * (phi.transpose() * phi).ldlt().solve(c);
    EXPECT_LE(exact_l2_error(exact, t, k, s.inputs), 1e-20);
}

TEST(ExactError, AgreesWithMonteCarlo) {
    const auto k = SpectralKernel::power_law(0.5, 16);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto t = build_truth(k, 3, 2, 0.5 * static_cast<double>(seed % 3), NormProfile::Inhomogeneous);
        const auto s = sample_data(t, k, 40, NoiseKind::Uniform, seed);
        const std::vector<SpectralKernel> ks(3, k);
        const GramSet g = assemble_gram(ks, s.inputs);
        RegularizationPlan plan;
        plan.lambda1 = 0.2 * compute_lambda_max(s.labels, g, 0.05);
        plan.lambda2 = 0.05;
        plan.lambda3 = 0.01;
        const auto sol = solve(s.labels, g, plan);
        const double exact = exact_l2_error(sol, t, k, s.inputs);
        const auto mc = monte_carlo_l2_error(sol, t, k, s.inputs, 100000, 1000 + seed);
        EXPECT_LE(std::abs(exact - mc.mean), 3.0 * mc.standard_error) << "seed " << seed;
    }
}

TEST(Fit, RecoversKnownSlope) {
    const std::vector<double> ns{100, 200, 400, 800};
    std::vector<double> v;
    for (double n : ns) v.push_back(3.0 * std::pow(n, -0.7));
    const auto f = fit_loglog(ns, v);
    EXPECT_NEAR(f.slope, -0.7, 1e-12);
    EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
    EXPECT_NEAR(f.standard_error, 0.0, 1e-10);
    EXPECT_THROW(fit_loglog({1.0}, {1.0}), ParameterError);
}

TEST(Profiles, DegenerateSingleActiveKernel) {
    auto a = small_config();
    a.d = 1;
    a.n_grid = {64};
    a.replications = 2;
    a.profile = NormProfile::Inhomogeneous;
    auto b = a;
    b.profile = NormProfile::Homogeneous;
    const auto cmp = compare_profiles(a, b, 0);
    ASSERT_EQ(cmp.rows.size(), 1u);
    EXPECT_NEAR(cmp.rows[0].ratio, 1.0, 1e-12);
    EXPECT_NEAR(cmp.reference_ratio_inhomogeneous, 1.0, 1e-12);
    auto bad = b;
    bad.M = 5;
    EXPECT_THROW(compare_profiles(a, bad, 0), ParameterError);
}

TEST(Output, AtomicWrite) {
    const auto dir = std::filesystem::temp_directory_path() / "mklrate_atomic_test";
    std::filesystem::create_directories(dir);
    write_atomically(dir / "x.txt", "hello\n");
    std::ifstream in(dir / "x.txt");
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str(), "hello\n");
    EXPECT_FALSE(std::filesystem::exists(dir / "x.txt.tmp"));
    std::filesystem::remove_all(dir);
}
