#include "mklrate/mkl_solver.hpp"

#include "mklrate/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace mklrate {

namespace {

// One block of the problem expressed in the eigenbasis of K_m. With
// alpha = U a and z = U^T r the block objective separates:
//   (1/n)||r||^2 + sum_j [(d_j^2/n + l3 d_j) a_j^2 - (2/n) d_j z_j a_j]
//     + l1 sqrt(sum_j w_j a_j^2),        w_j = d_j^2/n + l2 d_j.
class SpectralBlock {
public:
    SpectralBlock(const Eigen::VectorXd& d, double n, const RegularizationPlan& plan)
        : d_(d), n_(n), l1_(plan.lambda1), l3_(plan.lambda3) {
        w_ = d_.array().square() / n_ + plan.lambda2 * d_.array();
        quad_ = d_.array().square() / n_ + l3_ * d_.array();
    }

    // sqrt(g^T A^+ g) for g = (2/n) K r.
    double zero_statistic(const Eigen::VectorXd& z) const {
        const Eigen::ArrayXd g = (2.0 / n_) * d_.array() * z.array();
        return std::sqrt((g.square() / w_.array()).sum());
    }

    double penalty_norm(const Eigen::VectorXd& a) const { return std::sqrt((w_.array() * a.array().square()).sum()); }

    // Block objective without the (1/n)||r||^2 constant.
    double reduced_objective(const Eigen::VectorXd& z, const Eigen::VectorXd& a) const {
        const double quad = (quad_.array() * a.array().square()).sum() - (2.0 / n_) * (d_.array() * z.array() * a.array()).sum();
        return quad + l1_ * penalty_norm(a);
    }

    // Stationary point for a fixed value t of sqrt(a^T A a).
    Eigen::VectorXd at(const Eigen::VectorXd& z, double t) const {
        const Eigen::ArrayXd num = (2.0 / n_) * d_.array() * z.array();
        return (num / (2.0 * quad_.array() + (l1_ / t) * w_.array())).matrix();
    }

    Eigen::VectorXd unpenalized(const Eigen::VectorXd& z) const {
        return (z.array() / (d_.array() + n_ * l3_)).matrix();
    }

    Eigen::VectorXd minimize(const Eigen::VectorXd& z, const Eigen::VectorXd& warm) const {
        Eigen::VectorXd candidate;
        if (zero_statistic(z) <= l1_) {
            candidate = Eigen::VectorXd::Zero(d_.size());
        } else if (l1_ == 0.0) {
            candidate = unpenalized(z);
        } else {
            candidate = solve_scalar(z);
        }
        if (!candidate.allFinite()) throw SolverError("block update produced non-finite coefficients");
        if (warm.size() == d_.size() && reduced_objective(z, warm) <= reduced_objective(z, candidate)) return warm;
        return candidate;
    }

    // Unscaled KKT residual measured in the A^+ metric.
    double kkt(const Eigen::VectorXd& z, const Eigen::VectorXd& a) const {
        const double t = penalty_norm(a);
        if (t == 0.0) return std::max(0.0, zero_statistic(z) - l1_);
        Eigen::ArrayXd grad = 2.0 * quad_.array() * a.array() - (2.0 / n_) * d_.array() * z.array();
        grad += (l1_ / t) * w_.array() * a.array();
        return std::sqrt((grad.square() / w_.array()).sum());
    }

    double rkhs_sq(const Eigen::VectorXd& a) const { return (d_.array() * a.array().square()).sum(); }

private:
    double psi(const Eigen::VectorXd& z, double t) const { return t - penalty_norm(at(z, t)); }

    Eigen::VectorXd solve_scalar(const Eigen::VectorXd& z) const {
        const double t_hi = penalty_norm(unpenalized(z));
        double lo = 1e-12 * t_hi;
        double hi = t_hi;
        if (t_hi > 0.0 && psi(z, lo) < 0.0 && psi(z, hi) >= 0.0) {
            // psi(t)/t is increasing, so the sign change is unique.
            for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                (psi(z, mid) < 0.0 ? lo : hi) = mid;
            }
            return at(z, 0.5 * (lo + hi));
        }
        return golden_section(z, t_hi);
    }

    // Fallback when the bracket is numerically degenerate: minimise the
    // profile objective t -> F(a(t)) directly.
    Eigen::VectorXd golden_section(const Eigen::VectorXd& z, double t_hi) const {
        if (!(t_hi > 0.0) || !std::isfinite(t_hi)) throw SolverError("block update: invalid bisection bracket");
        constexpr double ratio = 0.6180339887498949;
        double a = 0.0;
        double b = t_hi;
        double c = b - ratio * (b - a);
        double e = a + ratio * (b - a);
        auto profile = [&](double t) { return t > 0.0 ? reduced_objective(z, at(z, t)) : 0.0; };
        double fc = profile(c);
        double fe = profile(e);
        for (int it = 0; it < 200 && b - a > 1e-14 * t_hi; ++it) {
            if (fc < fe) {
                b = e;
                e = c;
                fe = fc;
                c = b - ratio * (b - a);
                fc = profile(c);
            } else {
                a = c;
                c = e;
                fc = fe;
                e = a + ratio * (b - a);
                fe = profile(e);
            }
        }
        const double t = 0.5 * (a + b);
        if (!(t > 0.0)) return Eigen::VectorXd::Zero(d_.size());
        return at(z, t);
    }

    const Eigen::VectorXd& d_;
    double n_;
    double l1_;
    double l3_;
    Eigen::VectorXd w_;
    Eigen::VectorXd quad_;
};

void check_residual(const Eigen::VectorXd& r, const GramBlock& block) {
    if (r.size() != block.size()) throw ParameterError("residual", "length does not match Gram size");
}

}  // namespace

void RegularizationPlan::validate() const {
    if (!(lambda1 >= 0.0) || !std::isfinite(lambda1)) throw ParameterError("lambda1", "must be finite and >= 0");
    if (!(lambda2 > 0.0) || !std::isfinite(lambda2)) throw ParameterError("lambda2", "must be finite and > 0");
    if (!(lambda3 >= 0.0) || !std::isfinite(lambda3)) throw ParameterError("lambda3", "must be finite and >= 0");
}

std::string RegularizationPlan::provenance() const {
    if (!theory) return "manual";
    std::ostringstream os;
    os << "theory(" << theory->lambda_bar << ", " << theory->t << ")";
    return os.str();
}

double eta(double t, double n) { return std::max({1.0, std::sqrt(t), t / std::sqrt(n)}); }

double xi_n(double lambda_bar, double n, double s, double kernel_count) {
    const double a = std::pow(lambda_bar, -s / 2.0) / std::sqrt(n);
    const double b = std::pow(lambda_bar, -0.5) / std::pow(n, 1.0 / (1.0 + s));
    const double c = std::sqrt(std::log(kernel_count) / n);
    return std::max({a, b, c});
}

RegularizationPlan theory_plan(double n, double kernel_count, double s, double lambda_bar, double t, double scale) {
    if (!(lambda_bar > 0.0)) throw ParameterError("lambda_bar", "must be positive");
    if (!(t >= 1.0)) throw ParameterError("t", "must be >= 1");
    if (!(n >= 2.0)) throw ParameterError("n", "must be >= 2");
    if (!(kernel_count >= 2.0)) throw ParameterError("M", "must be >= 2");
    if (!(s > 0.0 && s < 1.0)) throw ParameterError("s", "must lie in (0, 1)");
    if (!(scale > 0.0)) throw ParameterError("scale", "must be positive");
    RegularizationPlan plan;
    plan.lambda1 = scale * eta(t, n) * xi_n(lambda_bar, n, s, kernel_count);
    plan.lambda2 = lambda_bar;
    plan.lambda3 = lambda_bar;
    plan.theory = TheoryProvenance{lambda_bar, t, s, scale, n, kernel_count};
    return plan;
}

double objective(const Eigen::VectorXd& y, const GramSet& gram, std::span<const Eigen::VectorXd> alpha,
                 const RegularizationPlan& plan) {
    const auto n = static_cast<double>(y.size());
    if (alpha.size() != gram.kernel_count()) throw ParameterError("alpha", "one block per kernel is required");
    if (y.size() != gram.sample_count()) throw ParameterError("y", "length does not match sample count");
    Eigen::VectorXd residual = y;
    double penalty = 0.0;
    for (std::size_t m = 0; m < alpha.size(); ++m) {
        if (alpha[m].size() != y.size()) throw ParameterError("alpha", "block length does not match sample count");
        const Eigen::MatrixXd K = gram.block(m).matrix();
        const Eigen::VectorXd Ka = K * alpha[m];
        residual -= Ka;
        const double quad = std::max(0.0, alpha[m].dot(Ka));
        penalty += plan.lambda1 * std::sqrt(Ka.squaredNorm() / n + plan.lambda2 * quad) + plan.lambda3 * quad;
    }
    return residual.squaredNorm() / n + penalty;
}

double zero_block_statistic(const Eigen::VectorXd& residual, const GramBlock& block, double lambda2) {
    check_residual(residual, block);
    RegularizationPlan plan;
    plan.lambda2 = lambda2;
    plan.validate();
    const SpectralBlock sb(block.eigenvalues, static_cast<double>(block.size()), plan);
    return sb.zero_statistic(block.eigenvectors.transpose() * residual);
}

bool zero_block_test(const Eigen::VectorXd& residual, const GramBlock& block, const RegularizationPlan& plan) {
    plan.validate();
    return zero_block_statistic(residual, block, plan.lambda2) <= plan.lambda1;
}

Eigen::VectorXd block_update(const Eigen::VectorXd& residual, const GramBlock& block, const RegularizationPlan& plan,
                             const Eigen::VectorXd& warm_start) {
    plan.validate();
    check_residual(residual, block);
    const SpectralBlock sb(block.eigenvalues, static_cast<double>(block.size()), plan);
    const Eigen::VectorXd z = block.eigenvectors.transpose() * residual;
    Eigen::VectorXd warm;
    if (warm_start.size() == block.size()) warm = block.eigenvectors.transpose() * warm_start;
    const Eigen::VectorXd a = sb.minimize(z, warm);
    // Return the warm start untouched when it was kept, so an optimal warm
    // start is a fixed point even if it has a null-space component.
    if (warm.size() > 0 && a.size() == warm.size() && (a.array() == warm.array()).all()) return warm_start;
    return block.eigenvectors * a;
}

double block_objective(const Eigen::VectorXd& residual, const GramBlock& block, const RegularizationPlan& plan,
                       const Eigen::VectorXd& alpha) {
    check_residual(residual, block);
    const SpectralBlock sb(block.eigenvalues, static_cast<double>(block.size()), plan);
    const Eigen::VectorXd z = block.eigenvectors.transpose() * residual;
    const Eigen::VectorXd a = block.eigenvectors.transpose() * alpha;
    return residual.squaredNorm() / static_cast<double>(block.size()) + sb.reduced_objective(z, a);
}

MklSolution solve(const Eigen::VectorXd& y, const GramSet& gram, const RegularizationPlan& plan,
                  const SolveOptions& options) {
    plan.validate();
    if (!(options.tol > 0.0)) throw ParameterError("tol", "must be positive");
    if (options.max_sweeps < 1) throw ParameterError("max_sweeps", "must be at least 1");
    if (y.size() != gram.sample_count()) throw ParameterError("y", "length does not match sample count");
    const std::size_t M = gram.kernel_count();
    const auto n = static_cast<double>(y.size());

    std::vector<SpectralBlock> blocks;
    std::vector<Eigen::VectorXd> coords(M);
    blocks.reserve(M);
    for (std::size_t m = 0; m < M; ++m) {
        const GramBlock& b = gram.block(m);
        blocks.emplace_back(b.eigenvalues, n, plan);
        if (options.warm_start.size() == M && options.warm_start[m].size() == y.size())
            coords[m] = b.eigenvectors.transpose() * options.warm_start[m];
        else
            coords[m] = Eigen::VectorXd::Zero(b.rank());
    }

    auto fitted = [&](std::size_t m) -> Eigen::VectorXd {
        const GramBlock& b = gram.block(m);
        return b.eigenvectors * (b.eigenvalues.array() * coords[m].array()).matrix();
    };
    auto fresh_residual = [&] {
        Eigen::VectorXd r = y;
        for (std::size_t m = 0; m < M; ++m)
            if (coords[m].size() > 0 && coords[m].any()) r -= fitted(m);
        return r;
    };
    auto total_objective = [&](const Eigen::VectorXd& r) {
        double value = r.squaredNorm() / n;
        for (std::size_t m = 0; m < M; ++m)
            value += plan.lambda1 * blocks[m].penalty_norm(coords[m]) + plan.lambda3 * blocks[m].rkhs_sq(coords[m]);
        if (!std::isfinite(value)) throw DivergedError("objective became non-finite; check the Gram matrices");
        return value;
    };
    auto projected = [&](std::size_t m, const Eigen::VectorXd& r) -> Eigen::VectorXd {
        const GramBlock& b = gram.block(m);
        // U^T (r + K_m alpha_m) = U^T r + d .* a
        return b.eigenvectors.transpose() * r + (b.eigenvalues.array() * coords[m].array()).matrix();
    };

    MklSolution sol;
    sol.plan = plan;
    sol.kkt_scale = 1.0 + y.norm() / std::sqrt(n);
    Eigen::VectorXd residual = fresh_residual();
    sol.objective_history.push_back(total_objective(residual));

    std::vector<std::size_t> order(M);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(options.shuffle_seed);

    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        if (options.shuffle) std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t m : order) {
            if (blocks[m].penalty_norm(coords[m]) == 0.0 && gram.block(m).rank() == 0) continue;
            const Eigen::VectorXd z = projected(m, residual);
            Eigen::VectorXd next = blocks[m].minimize(z, coords[m]);
            const Eigen::VectorXd delta = next - coords[m];
            if (delta.any()) {
                const GramBlock& b = gram.block(m);
                residual -= b.eigenvectors * (b.eigenvalues.array() * delta.array()).matrix();
                coords[m] = std::move(next);
            }
        }
        residual = fresh_residual();
        sol.objective_history.push_back(total_objective(residual));
        sol.sweeps_used = sweep;

        double worst = 0.0;
        for (std::size_t m = 0; m < M; ++m) worst = std::max(worst, blocks[m].kkt(projected(m, residual), coords[m]));
        sol.kkt_residual = worst / sol.kkt_scale;
        if (sol.kkt_residual <= options.tol) {
            sol.converged = true;
            break;
        }
    }

    for (std::size_t m = 0; m < M; ++m) {
        const GramBlock& b = gram.block(m);
        sol.alpha_blocks.push_back(b.eigenvectors * coords[m]);
        sol.component_values.push_back(fitted(m));
        const bool nonzero = coords[m].size() > 0 && coords[m].any();
        if (nonzero) sol.active_estimate.push_back(static_cast<int>(m));
        sol.empirical_norms.push_back(sol.component_values.back().norm() / std::sqrt(n));
        sol.rkhs_norms.push_back(std::sqrt(blocks[m].rkhs_sq(coords[m])));
    }
    return sol;
}

double compute_lambda_max(const Eigen::VectorXd& y, const GramSet& gram, double lambda2) {
    double best = 0.0;
    for (const GramBlock& b : gram.blocks()) best = std::max(best, zero_block_statistic(y, b, lambda2));
    return best;
}

nlohmann::json to_json(const RegularizationPlan& plan) {
    nlohmann::json j = {
        {"lambda1", plan.lambda1},
        {"lambda2", plan.lambda2},
        {"lambda3", plan.lambda3},
        {"provenance", plan.provenance()},
    };
    if (plan.theory) {
        j["theory"] = {{"lambda_bar", plan.theory->lambda_bar}, {"t", plan.theory->t},
                       {"s", plan.theory->s},                   {"scale", plan.theory->scale},
                       {"n", plan.theory->n},                   {"M", plan.theory->kernel_count}};
    }
    return j;
}

nlohmann::json to_json(const MklSolution& solution) {
    return {
        {"plan", to_json(solution.plan)},
        {"empirical_norms", solution.empirical_norms},
        {"rkhs_norms", solution.rkhs_norms},
        {"active_estimate", solution.active_estimate},
        {"objective_history", solution.objective_history},
        {"kkt_residual", solution.kkt_residual},
        {"kkt_scale", solution.kkt_scale},
        {"sweeps_used", solution.sweeps_used},
        {"converged", solution.converged},
    };
}

}  // namespace mklrate
