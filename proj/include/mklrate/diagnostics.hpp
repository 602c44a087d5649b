#pragma once

#include "mklrate/kernel_core.hpp"
#include "mklrate/mkl_solver.hpp"
#include "mklrate/synthetic_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace mklrate {

// Incoherence estimates. Population L2 norms are replaced by the empirical
// norm at the samples, and each RKHS by the range of its Gram matrix, so
// these are estimates of the population quantities.

/// min over u_m in range(K_m), m in I, of ||sum u_m||^2 / sum ||u_m||^2.
/// Exactly 1 when |I| = 1. Clipped to [0, 1].
double empirical_kappa_min(const GramSet& gram, const std::vector<int>& index_set);

/// Largest canonical correlation between span{range(K_m) : m in I} and
/// span{range(K_m) : m not in I}. Clipped to [0, 1].
double empirical_rho(const GramSet& gram, const std::vector<int>& index_set);

struct Lemma1Check {
    /// min over draws of ||f||_n^2 - (1 - rho^2) kappa sum_{m in I} ||f_m||_n^2
    double min_slack = 0.0;
    /// Same, each draw divided by sum_m ||f_m||_n^2 (1 for the zero draw).
    double min_relative_slack = 0.0;
    double kappa_min = 1.0;
    double rho = 0.0;
};

/// Random draws f_m = K_m beta_m with Gaussian beta_m.
Lemma1Check check_lemma1(const GramSet& gram, const std::vector<int>& index_set, int trials, std::uint64_t seed);

/// Slack of a single set of component values (n x M, column m = f_m at the samples).
double lemma1_slack(const Eigen::MatrixXd& components, const std::vector<int>& index_set, double kappa_min,
                    double rho);

/// R_{p,g*} = (sum_m ||g*_m||_H^p)^{1/p}; p in {1, 2, inf}.
double mixed_norm(const TruthModel& truth, const SpectralKernel& kernel, double p);

/// d^{1/(1+q+s)} n^{-1/(1+q+s)} R2^{-2/(1+q+s)}
double lambda_star(double d, double n, double s, double q, double r2);

/// (1+q)/(1+q+s), the n-exponent of the elastic-net MKL bound.
double rate_exponent(double s, double q);

enum class MixedNormBall { L2, LInf };

struct MinimaxExponents {
    double n_exponent;  ///< 1/(1+s~), s~ = s/(1+q)
    double d_exponent;  ///< 1/(1+s~) on the l2 ball, 1 on the l-inf ball
};

MinimaxExponents minimax_reference(double s, double q, MixedNormBall ball);

/// 2s/(1+q): covering-number exponent of the smoothness class.
double entropy_exponent(double s, double q);

struct ConditionProfile {
    double profile = 0.0;  ///< sqrt(n) xi_n^2 (d + lambda3^{1+q} R2^2 / lambda1^2)
    bool log_condition = false;  ///< log(M) / sqrt(n) <= 1
};

/// Constant-free core of the large-n condition attached to the theory
/// plan. The plan must carry theory provenance (for s and lambda_bar).
ConditionProfile theorem1_condition_profile(double d, double n, double kernel_count, const RegularizationPlan& plan,
                                            double r2, double q);

struct DiagnosticsReport {
    std::vector<int> index_set;
    double kappa_min = 1.0;
    double rho = 0.0;
    double incoherence_product = 1.0;
    double r1 = 0.0;
    double r2 = 0.0;
    double r_inf = 0.0;
    double rate_exponent = 0.0;
    MinimaxExponents minimax_l2{};
    MinimaxExponents minimax_linf{};
    double entropy_exponent = 0.0;
};

DiagnosticsReport diagnose(const GramSet& gram, const TruthModel& truth, const SpectralKernel& kernel,
                           const std::vector<int>& index_set);

nlohmann::json to_json(const DiagnosticsReport& report);

}  // namespace mklrate
