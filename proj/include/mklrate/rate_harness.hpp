#pragma once

#include "mklrate/diagnostics.hpp"
#include "mklrate/kernel_core.hpp"
#include "mklrate/mkl_solver.hpp"
#include "mklrate/synthetic_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mklrate {

struct LambdaPolicy {
    enum class Kind {
        Theory,  ///< fixed scale on the theory plan with lambda_bar from the known truth
        Pilot,   ///< scale picked once on a pilot train/validation split, then held fixed
    };
    Kind kind = Kind::Theory;
    double scale = 1.0;             ///< multiplies lambda1
    double lambda_bar_scale = 1.0;  ///< multiplies lambda_star before lambda1 is derived from it
    double t = 1.0;
    std::vector<double> pilot_scales{0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};

    bool operator==(const LambdaPolicy&) const = default;
};

struct TestPolicy {
    enum class Kind { Exact, MonteCarlo };
    Kind kind = Kind::Exact;
    int n_test = 100000;

    bool operator==(const TestPolicy&) const = default;
};

struct ExperimentConfig {
    double s = 0.0;
    double q = 0.0;
    int d = 0;
    int M = 0;
    NormProfile profile = NormProfile::Homogeneous;
    double noise_bound = 0.1;
    NoiseKind noise = NoiseKind::Uniform;
    std::vector<int> n_grid;
    int replications = 1;
    LambdaPolicy lambda_policy;
    std::uint64_t seed = 20110214;
    TestPolicy test_policy;
    int truncation = 128;
    double tol = 1e-6;
    int max_sweeps = 5000;

    /// Throws ParameterError naming the offending field.
    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses and validates. s, q, d, M, profile and n_grid are required; the
/// rest fall back to defaults. The seed may be given as a number or a
/// decimal string.
ExperimentConfig parse_config(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

/// Basis coefficients of each fitted component,
/// c_{k,m} = mu_k sum_i alpha_{m,i} phi_k(x_i^(m)).
std::vector<Eigen::VectorXd> fitted_coefficients(const MklSolution& solution, const SpectralKernel& kernel,
                                                 const Eigen::MatrixXd& inputs);

/// ||f_hat - f*||^2 in L2 of the uniform product law, from basis
/// coefficients. Cross terms vanish because coordinates are independent and
/// the basis is centred.
double exact_l2_error(const MklSolution& solution, const TruthModel& truth, const SpectralKernel& kernel,
                      const Eigen::MatrixXd& inputs);

/// f_hat at new points by direct kernel sums over the training inputs.
Eigen::VectorXd predict(const MklSolution& solution, const SpectralKernel& kernel, const Eigen::MatrixXd& train_inputs,
                        const Eigen::MatrixXd& points);

struct MonteCarloEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

MonteCarloEstimate monte_carlo_l2_error(const MklSolution& solution, const TruthModel& truth,
                                        const SpectralKernel& kernel, const Eigen::MatrixXd& inputs, int n_test,
                                        std::uint64_t seed);

struct SlopeFit {
    double slope = 0.0;
    double standard_error = 0.0;
    double intercept = 0.0;
};

/// OLS fit of log(value) against log(n).
SlopeFit fit_loglog(const std::vector<double>& ns, const std::vector<double>& values);

struct CellResult {
    int n = 0;
    int rep = 0;
    std::uint64_t seed = 0;
    double lambda_bar = 0.0;
    double lambda1 = 0.0;
    double lambda_max = 0.0;
    double err_l2sq = 0.0;
    double zero_err = 0.0;
    bool support_ok = false;
    bool beats_zero = true;  ///< err <= zero-predictor error (only checked when lambda1 < lambda_max)
    int sweeps = 0;
    double runtime_ms = 0.0;
    bool failed = false;
    std::string failure;
};

struct SizeSummary {
    int n = 0;
    double mean_error = 0.0;
    double sd_error = 0.0;
    int count = 0;
    double secondary_term = 0.0;  ///< d log(M) / n
};

struct RateReport {
    ExperimentConfig config;
    double scale_used = 1.0;
    std::vector<CellResult> rows;
    std::vector<SizeSummary> per_n;
    std::optional<SlopeFit> fit;  ///< present with >= 4 usable grid points
    double reference_exponent = 0.0;
    /// L2 energy an untruncated power-law truth would carry beyond the
    /// truncation level.
    double truncation_floor = 0.0;
    int failed_cells = 0;
    int beats_zero_violations = 0;
    std::optional<DiagnosticsReport> diagnostics;
};

/// lambda_star(d, n, s, q, R2) times the policy's lambda_bar_scale.
double policy_lambda_bar(const ExperimentConfig& config, int n, double r2);

/// Cell seed derived from (base seed, n, replication).
std::uint64_t cell_seed(std::uint64_t base, int n, int rep);

/// Scale chosen by the pilot split (smallest n of the grid).
double pilot_scale(const ExperimentConfig& config);

/// Runs every (n, replication) cell, in parallel over `jobs` threads (0 =
/// all available). Throws SolverError when more than 5% of cells fail.
RateReport run_sweep(const ExperimentConfig& config, int jobs = 0, bool with_diagnostics = true);

struct ProfileRow {
    int n = 0;
    double mean_inhomogeneous = 0.0;
    double mean_homogeneous = 0.0;
    double ratio = 0.0;  ///< inhomogeneous / homogeneous
    bool inhomogeneous_not_worse = false;
};

struct ProfileComparison {
    RateReport inhomogeneous;
    RateReport homogeneous;
    std::vector<ProfileRow> rows;
    /// Leading-term ratio of the l2-ball rate to the l-inf-ball rate for the
    /// inhomogeneous truth; exactly 1 for the homogeneous one.
    double reference_ratio_inhomogeneous = 1.0;
    double reference_ratio_homogeneous = 1.0;
    bool all_not_worse = false;
};

/// Paired sweeps of two configs that differ only in profile.
ProfileComparison compare_profiles(const ExperimentConfig& a, const ExperimentConfig& b, int jobs = 0);

nlohmann::json summary_json(const RateReport& report);
nlohmann::json to_json(const ProfileComparison& comparison);

/// Header plus one line per cell; doubles at 17 significant digits.
std::string results_csv(const RateReport& report);

/// Writes via a temporary file in the same directory and a rename.
void write_atomically(const std::filesystem::path& path, const std::string& contents);

}  // namespace mklrate
