#include "mklrate/synthetic_model.hpp"

#include "mklrate/errors.hpp"

#include <cmath>

namespace mklrate {

std::string_view to_string(NormProfile profile) {
    return profile == NormProfile::Homogeneous ? "homogeneous" : "inhomogeneous";
}

std::string_view to_string(NoiseKind kind) { return kind == NoiseKind::Uniform ? "uniform" : "rademacher"; }

NormProfile parse_profile(std::string_view text) {
    if (text == "homogeneous") return NormProfile::Homogeneous;
    if (text == "inhomogeneous") return NormProfile::Inhomogeneous;
    throw ParameterError("profile", "expected 'homogeneous' or 'inhomogeneous'");
}

NoiseKind parse_noise_kind(std::string_view text) {
    if (text == "uniform") return NoiseKind::Uniform;
    if (text == "rademacher") return NoiseKind::Rademacher;
    throw ParameterError("noise", "expected 'uniform' or 'rademacher'");
}

double profile_norm(NormProfile profile, int active_rank) {
    return profile == NormProfile::Homogeneous ? 1.0 : 1.0 / active_rank;
}

std::vector<double> TruthModel::f_component(int m, int truncation) const {
    if (m >= 0 && m < active_count) return f_coefficients[static_cast<std::size_t>(m)];
    return std::vector<double>(static_cast<std::size_t>(truncation), 0.0);
}

double TruthModel::g_rkhs_norm(const SpectralKernel& kernel, int active_rank) const {
    return std::sqrt(rkhs_norm_sq(kernel, g_coefficients.at(static_cast<std::size_t>(active_rank - 1))));
}

double TruthModel::f_rkhs_norm(const SpectralKernel& kernel, int active_rank) const {
    return std::sqrt(rkhs_norm_sq(kernel, f_coefficients.at(static_cast<std::size_t>(active_rank - 1))));
}

double TruthModel::f_l2_norm_sq() const {
    double acc = 0.0;
    for (const auto& f : f_coefficients) acc += l2_norm_sq(f);
    return acc;
}

TruthModel build_truth(const SpectralKernel& kernel, int kernel_count, int active_count, double q,
                       NormProfile profile, double noise_bound) {
    if (kernel_count < 1) throw ParameterError("M", "must be at least 1");
    if (active_count < 1) throw ParameterError("d", "must be at least 1");
    if (active_count > kernel_count) throw ParameterError("d", "must not exceed M");
    if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("q", "must lie in [0, 1]");
    if (!(noise_bound >= 0.0) || !std::isfinite(noise_bound)) throw ParameterError("noise_bound", "must be >= 0");

    const int K = kernel.truncation();
    const auto mu = kernel.eigenvalues();
    std::vector<double> shape(static_cast<std::size_t>(K));
    for (int k = 1; k <= K; ++k) {
        const double sign = (k % 2 == 1) ? 1.0 : -1.0;
        shape[static_cast<std::size_t>(k - 1)] = sign * std::sqrt(mu[static_cast<std::size_t>(k - 1)]) / k;
    }
    const double shape_norm = std::sqrt(rkhs_norm_sq(kernel, shape));

    TruthModel truth;
    truth.kernel_count = kernel_count;
    truth.active_count = active_count;
    truth.q = q;
    truth.profile = profile;
    truth.noise_bound = noise_bound;
    for (int rank = 1; rank <= active_count; ++rank) {
        truth.active_set.push_back(rank - 1);
        std::vector<double> g(shape);
        const double factor = profile_norm(profile, rank) / shape_norm;
        for (double& b : g) b *= factor;
        truth.f_coefficients.push_back(apply_operator_power(kernel, g, q / 2.0));
        truth.g_coefficients.push_back(std::move(g));
    }
    return truth;
}

RegressionSample sample_data(const TruthModel& truth, const SpectralKernel& kernel, int n, NoiseKind noise,
                             std::uint64_t seed) {
    if (n < 1) throw ParameterError("n", "must be at least 1");
    std::mt19937_64 rng(seed);
    RegressionSample sample;
    sample.seed = seed;
    sample.inputs.resize(n, truth.kernel_count);
    sample.noise.resize(n);
    // Row-major draw order keeps samples a prefix-stable function of the seed.
    for (int i = 0; i < n; ++i)
        for (int m = 0; m < truth.kernel_count; ++m) sample.inputs(i, m) = uniform01(rng);
    const double L = truth.noise_bound;
    for (int i = 0; i < n; ++i) {
        const double u = uniform01(rng);
        sample.noise[i] = noise == NoiseKind::Uniform ? L * (2.0 * u - 1.0) : (u < 0.5 ? -L : L);
    }
    sample.labels = evaluate_truth(truth, kernel, sample.inputs) + sample.noise;
    return sample;
}

double evaluate_truth(const TruthModel& truth, const SpectralKernel& kernel, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(truth.kernel_count))
        throw ParameterError("x", "input arity does not match kernel count");
    double value = 0.0;
    for (std::size_t a = 0; a < truth.active_set.size(); ++a) {
        const double coord = x[static_cast<std::size_t>(truth.active_set[a])];
        const auto& coeffs = truth.f_coefficients[a];
        for (std::size_t k = 0; k < coeffs.size(); ++k) value += coeffs[k] * kernel.phi(static_cast<int>(k) + 1, coord);
    }
    // Inactive coordinates are still range-checked.
    for (double c : x) basis_function(kernel.basis(), 1, c);
    return value;
}

Eigen::VectorXd evaluate_truth(const TruthModel& truth, const SpectralKernel& kernel, const Eigen::MatrixXd& inputs) {
    if (inputs.cols() != truth.kernel_count) throw ParameterError("inputs", "input arity does not match kernel count");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(inputs.rows());
    for (std::size_t a = 0; a < truth.active_set.size(); ++a) {
        const Eigen::MatrixXd phi = basis_matrix(kernel, inputs.col(truth.active_set[a]));
        const auto& c = truth.f_coefficients[a];
        out += phi * Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    }
    for (Eigen::Index i = 0; i < inputs.size(); ++i) basis_function(kernel.basis(), 1, inputs.data()[i]);
    return out;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

nlohmann::json to_json(const TruthModel& truth) {
    return {
        {"M", truth.kernel_count},
        {"d", truth.active_count},
        {"q", truth.q},
        {"profile", to_string(truth.profile)},
        {"noise_bound", truth.noise_bound},
        {"active_set", truth.active_set},
        {"g_coefficients", truth.g_coefficients},
        {"f_coefficients", truth.f_coefficients},
    };
}

nlohmann::json to_json(const RegressionSample& sample) {
    nlohmann::json inputs = nlohmann::json::array();
    for (Eigen::Index i = 0; i < sample.inputs.rows(); ++i) {
        std::vector<double> row(sample.inputs.cols());
        for (Eigen::Index m = 0; m < sample.inputs.cols(); ++m) row[static_cast<std::size_t>(m)] = sample.inputs(i, m);
        inputs.push_back(std::move(row));
    }
    return {
        {"seed", sample.seed},
        {"inputs", std::move(inputs)},
        {"labels", std::vector<double>(sample.labels.data(), sample.labels.data() + sample.labels.size())},
        {"noise", std::vector<double>(sample.noise.data(), sample.noise.data() + sample.noise.size())},
    };
}

}  // namespace mklrate
