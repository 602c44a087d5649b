#pragma once

#include "mklrate/kernel_core.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mklrate {

/// Records how a plan was derived from the theoretical settings.
struct TheoryProvenance {
    double lambda_bar = 0.0;
    double t = 1.0;
    double s = 0.5;
    double scale = 1.0;  ///< stands in for the unknown theory constant
    double n = 0.0;
    double kernel_count = 0.0;
};

/// Regularisation weights of the elastic-net MKL objective
///   (1/n)||y - sum_m K_m a_m||^2
///     + lambda1 sum_m sqrt(a_m^T (K_m K_m / n + lambda2 K_m) a_m)
///     + lambda3 sum_m a_m^T K_m a_m.
struct RegularizationPlan {
    double lambda1 = 0.0;
    double lambda2 = 1.0;
    double lambda3 = 0.0;
    std::optional<TheoryProvenance> theory;  ///< empty for manual plans

    /// lambda1 >= 0, lambda2 > 0, lambda3 >= 0, all finite.
    void validate() const;
    std::string provenance() const;
};

/// max(1, sqrt(t), t / sqrt(n))
double eta(double t, double n);

/// max(lambda^{-s/2} / sqrt(n), lambda^{-1/2} / n^{1/(1+s)}, sqrt(log M / n))
double xi_n(double lambda_bar, double n, double s, double kernel_count);

/// lambda2 = lambda3 = lambda_bar, lambda1 = scale * eta(t) * xi_n(lambda_bar).
/// M is accepted as a real so that log M can be set directly.
RegularizationPlan theory_plan(double n, double kernel_count, double s, double lambda_bar, double t,
                               double scale = 1.0);

/// Objective value evaluated from the dense Gram matrices.
double objective(const Eigen::VectorXd& y, const GramSet& gram, std::span<const Eigen::VectorXd> alpha,
                 const RegularizationPlan& plan);

/// sqrt(g^T A^+ g) with g = (2/n) K r and A = K K / n + lambda2 K; the
/// smallest lambda1 for which a zero block is optimal given residual r.
double zero_block_statistic(const Eigen::VectorXd& residual, const GramBlock& block, double lambda2);

/// True iff alpha_m = 0 minimises the block subproblem for this residual.
bool zero_block_test(const Eigen::VectorXd& residual, const GramBlock& block, const RegularizationPlan& plan);

/// Exact minimiser of the block subproblem
///   (1/n)||r - K a||^2 + lambda1 sqrt(a^T A a) + lambda3 a^T K a.
/// The result lies in range(K). Never returns a point with a higher block
/// objective than the warm start.
Eigen::VectorXd block_update(const Eigen::VectorXd& residual, const GramBlock& block, const RegularizationPlan& plan,
                             const Eigen::VectorXd& warm_start);

/// Block subproblem value (including the constant (1/n)||r||^2).
double block_objective(const Eigen::VectorXd& residual, const GramBlock& block, const RegularizationPlan& plan,
                       const Eigen::VectorXd& alpha);

struct SolveOptions {
    /// Stop when max block KKT residual / (1 + ||y|| / sqrt(n)) <= tol.
    double tol = 1e-6;
    int max_sweeps = 10000;
    /// Fixed cyclic order 0..M-1 unless set, in which case each sweep uses a
    /// fresh permutation drawn from `shuffle_seed`.
    bool shuffle = false;
    std::uint64_t shuffle_seed = 0;
    std::vector<Eigen::VectorXd> warm_start;  ///< optional, one vector per block
};

struct MklSolution {
    std::vector<Eigen::VectorXd> alpha_blocks;
    std::vector<Eigen::VectorXd> component_values;  ///< K_m alpha_m at the samples
    /// Entry 0 is the starting point; one entry per completed sweep after that.
    std::vector<double> objective_history;
    double kkt_residual = 0.0;       ///< scaled, see SolveOptions::tol
    double kkt_scale = 1.0;          ///< 1 + ||y|| / sqrt(n)
    std::vector<int> active_estimate;
    int sweeps_used = 0;
    bool converged = false;
    std::vector<double> empirical_norms;  ///< ||f_m||_n
    std::vector<double> rkhs_norms;       ///< sqrt(alpha_m^T K_m alpha_m)
    RegularizationPlan plan;

    double final_objective() const { return objective_history.back(); }
};

/// Block coordinate descent. When the sweep budget runs out the solution is
/// returned with `converged == false`. Throws DivergedError on a non-finite
/// objective.
MklSolution solve(const Eigen::VectorXd& y, const GramSet& gram, const RegularizationPlan& plan,
                  const SolveOptions& options = {});

/// max_m zero_block_statistic(y, K_m, lambda2): any larger lambda1 gives the
/// all-zero solution.
double compute_lambda_max(const Eigen::VectorXd& y, const GramSet& gram, double lambda2);

nlohmann::json to_json(const RegularizationPlan& plan);
nlohmann::json to_json(const MklSolution& solution);

}  // namespace mklrate
