#pragma once

#include "mklrate/kernel_core.hpp"

#include <json.hpp>

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace mklrate {

enum class NormProfile {
    Homogeneous,    ///< ||g*_m||_H = 1 for every active m
    Inhomogeneous,  ///< ||g*_m||_H = 1 / rank(m) within the active set
};

enum class NoiseKind {
    Uniform,     ///< uniform on [-L, L]
    Rademacher,  ///< +-L with equal probability
};

std::string_view to_string(NormProfile profile);
std::string_view to_string(NoiseKind kind);
NormProfile parse_profile(std::string_view text);
NoiseKind parse_noise_kind(std::string_view text);

/// Sparse additive ground truth on [0, 1]^M. Every component lives in the
/// RKHS of the shared kernel; components are stored as basis coefficients.
/// Kernel indices are 0-based and the active set is {0, ..., d - 1}.
struct TruthModel {
    int kernel_count = 0;
    int active_count = 0;
    double q = 0.0;
    NormProfile profile = NormProfile::Homogeneous;
    double noise_bound = 0.1;
    std::vector<int> active_set;
    std::vector<std::vector<double>> g_coefficients;  ///< per active component
    std::vector<std::vector<double>> f_coefficients;  ///< mu^{q/2} g, per active component

    /// Coefficients of f*_m for any m (all zero when m is inactive).
    std::vector<double> f_component(int m, int truncation) const;
    double g_rkhs_norm(const SpectralKernel& kernel, int active_rank) const;
    double f_rkhs_norm(const SpectralKernel& kernel, int active_rank) const;
    double f_l2_norm_sq() const;
};

struct RegressionSample {
    Eigen::MatrixXd inputs;  ///< n x M, uniform on the unit cube
    Eigen::VectorXd labels;
    Eigen::VectorXd noise;
    std::uint64_t seed = 0;
};

/// Target norm of g*_m for the 1-based rank within the active set.
double profile_norm(NormProfile profile, int active_rank);

/// Deterministic truth: g*_m has coefficients sigma_k mu_k^{1/2} / k with
/// alternating signs, rescaled to the profile norm; f*_m = T^{q/2} g*_m.
TruthModel build_truth(const SpectralKernel& kernel, int kernel_count, int active_count, double q,
                       NormProfile profile, double noise_bound = 0.1);

RegressionSample sample_data(const TruthModel& truth, const SpectralKernel& kernel, int n,
                             NoiseKind noise = NoiseKind::Uniform, std::uint64_t seed = 0);

double evaluate_truth(const TruthModel& truth, const SpectralKernel& kernel, std::span<const double> x);
/// Row-wise evaluation over an n x M input matrix.
Eigen::VectorXd evaluate_truth(const TruthModel& truth, const SpectralKernel& kernel, const Eigen::MatrixXd& inputs);

/// Uniform double in [0, 1) from the top 53 bits; portable across standard
/// library implementations.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// splitmix64 finaliser, used to derive per-cell seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

nlohmann::json to_json(const TruthModel& truth);
nlohmann::json to_json(const RegressionSample& sample);

}  // namespace mklrate
