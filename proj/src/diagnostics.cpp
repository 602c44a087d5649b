#include "mklrate/diagnostics.hpp"

#include "mklrate/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace mklrate {

namespace {

std::vector<int> checked_index_set(const GramSet& gram, const std::vector<int>& index_set) {
    if (index_set.empty()) throw ParameterError("index_set", "must be nonempty");
    std::set<int> seen;
    for (int m : index_set) {
        if (m < 0 || static_cast<std::size_t>(m) >= gram.kernel_count())
            throw ParameterError("index_set", "kernel index out of range");
        if (!seen.insert(m).second) throw ParameterError("index_set", "duplicate kernel index");
    }
    return {seen.begin(), seen.end()};
}

std::vector<int> complement(const GramSet& gram, const std::vector<int>& sorted_set) {
    std::vector<int> out;
    for (int m = 0; m < static_cast<int>(gram.kernel_count()); ++m)
        if (!std::binary_search(sorted_set.begin(), sorted_set.end(), m)) out.push_back(m);
    return out;
}

Eigen::MatrixXd stacked_ranges(const GramSet& gram, const std::vector<int>& set) {
    Eigen::Index cols = 0;
    for (int m : set) cols += gram.block(static_cast<std::size_t>(m)).rank();
    Eigen::MatrixXd g(gram.sample_count(), cols);
    Eigen::Index at = 0;
    for (int m : set) {
        const auto& u = gram.block(static_cast<std::size_t>(m)).eigenvectors;
        g.middleCols(at, u.cols()) = u;
        at += u.cols();
    }
    return g;
}

// Orthonormal basis of the column span, dropping directions whose singular
// value falls below the shared rank tolerance.
Eigen::MatrixXd span_basis(const Eigen::MatrixXd& g) {
    if (g.cols() == 0) return g;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(g, Eigen::ComputeThinU);
    const Eigen::VectorXd& sv = svd.singularValues();
    Eigen::Index rank = 0;
    if (sv.size() > 0 && sv[0] > 0.0)
        while (rank < sv.size() && sv[rank] > kRankTolerance * sv[0]) ++rank;
    return svd.matrixU().leftCols(rank);
}

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

void check_exponent_args(double s, double q) {
    if (!(s > 0.0 && s < 1.0)) throw ParameterError("s", "must lie in (0, 1)");
    if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("q", "must lie in [0, 1]");
}

}  // namespace

double empirical_kappa_min(const GramSet& gram, const std::vector<int>& index_set) {
    const auto set = checked_index_set(gram, index_set);
    if (set.size() == 1) return 1.0;
    const Eigen::MatrixXd g = stacked_ranges(gram, set);
    if (g.cols() == 0) return 1.0;
    if (g.cols() > g.rows()) return 0.0;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(g);
    const double smallest = svd.singularValues()[g.cols() - 1];
    return clip01(smallest * smallest);
}

double empirical_rho(const GramSet& gram, const std::vector<int>& index_set) {
    const auto set = checked_index_set(gram, index_set);
    const auto rest = complement(gram, set);
    if (rest.empty()) throw ParameterError("index_set", "complement is empty");
    const Eigen::MatrixXd qi = span_basis(stacked_ranges(gram, set));
    const Eigen::MatrixXd qc = span_basis(stacked_ranges(gram, rest));
    if (qi.cols() == 0 || qc.cols() == 0) return 0.0;
    const Eigen::MatrixXd cross = qi.transpose() * qc;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(cross);
    return clip01(svd.singularValues()[0]);
}

double lemma1_slack(const Eigen::MatrixXd& components, const std::vector<int>& index_set, double kappa_min,
                    double rho) {
    const auto n = static_cast<double>(components.rows());
    const double total = components.rowwise().sum().squaredNorm() / n;
    double active = 0.0;
    for (int m : index_set) active += components.col(m).squaredNorm() / n;
    return total - (1.0 - rho * rho) * kappa_min * active;
}

Lemma1Check check_lemma1(const GramSet& gram, const std::vector<int>& index_set, int trials, std::uint64_t seed) {
    if (trials < 1) throw ParameterError("trials", "must be at least 1");
    const auto set = checked_index_set(gram, index_set);
    Lemma1Check out;
    out.kappa_min = empirical_kappa_min(gram, set);
    out.rho = complement(gram, set).empty() ? 0.0 : empirical_rho(gram, set);
    out.min_slack = std::numeric_limits<double>::infinity();
    out.min_relative_slack = std::numeric_limits<double>::infinity();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Eigen::Index n = gram.sample_count();
    const auto M = static_cast<Eigen::Index>(gram.kernel_count());
    Eigen::MatrixXd comps(n, M);
    for (int trial = 0; trial < trials; ++trial) {
        for (Eigen::Index m = 0; m < M; ++m) {
            Eigen::VectorXd beta(n);
            for (Eigen::Index i = 0; i < n; ++i) beta[i] = gauss(rng);
            comps.col(m) = gram.block(static_cast<std::size_t>(m)).apply(beta);
        }
        const double slack = lemma1_slack(comps, set, out.kappa_min, out.rho);
        const double scale = comps.colwise().squaredNorm().sum() / static_cast<double>(n);
        out.min_slack = std::min(out.min_slack, slack);
        out.min_relative_slack = std::min(out.min_relative_slack, scale > 0.0 ? slack / scale : slack);
    }
    return out;
}

double mixed_norm(const TruthModel& truth, const SpectralKernel& kernel, double p) {
    std::vector<double> norms;
    for (int rank = 1; rank <= truth.active_count; ++rank) norms.push_back(truth.g_rkhs_norm(kernel, rank));
    if (std::isinf(p) && p > 0) return norms.empty() ? 0.0 : *std::max_element(norms.begin(), norms.end());
    if (p == 1.0) {
        double acc = 0.0;
        for (double v : norms) acc += v;
        return acc;
    }
    if (p == 2.0) {
        double acc = 0.0;
        for (double v : norms) acc += v * v;
        return std::sqrt(acc);
    }
    throw ParameterError("p", "supported values are 1, 2 and infinity");
}

double lambda_star(double d, double n, double s, double q, double r2) {
    if (!(d > 0.0) || !(n > 0.0) || !(s > 0.0) || !(r2 > 0.0) || !(q >= 0.0))
        throw ParameterError("lambda_star", "d, n, s and R2 must be positive and q nonnegative");
    const double e = 1.0 / (1.0 + q + s);
    return std::pow(d, e) * std::pow(n, -e) * std::pow(r2, -2.0 * e);
}

double rate_exponent(double s, double q) {
    check_exponent_args(s, q);
    return (1.0 + q) / (1.0 + q + s);
}

MinimaxExponents minimax_reference(double s, double q, MixedNormBall ball) {
    check_exponent_args(s, q);
    const double s_tilde = s / (1.0 + q);
    const double ne = 1.0 / (1.0 + s_tilde);
    return {ne, ball == MixedNormBall::L2 ? ne : 1.0};
}

double entropy_exponent(double s, double q) {
    check_exponent_args(s, q);
    return 2.0 * s / (1.0 + q);
}

ConditionProfile theorem1_condition_profile(double d, double n, double kernel_count, const RegularizationPlan& plan,
                                            double r2, double q) {
    if (!plan.theory) throw ParameterError("plan", "theory provenance is required");
    const double xi = xi_n(plan.theory->lambda_bar, n, plan.theory->s, kernel_count);
    double ridge_term = 0.0;
    if (r2 != 0.0) ridge_term = std::pow(plan.lambda3, 1.0 + q) * r2 * r2 / (plan.lambda1 * plan.lambda1);
    return {std::sqrt(n) * xi * xi * (d + ridge_term), std::log(kernel_count) / std::sqrt(n) <= 1.0};
}

DiagnosticsReport diagnose(const GramSet& gram, const TruthModel& truth, const SpectralKernel& kernel,
                           const std::vector<int>& index_set) {
    const auto set = checked_index_set(gram, index_set);
    DiagnosticsReport r;
    r.index_set = set;
    r.kappa_min = empirical_kappa_min(gram, set);
    r.rho = complement(gram, set).empty() ? 0.0 : empirical_rho(gram, set);
    r.incoherence_product = (1.0 - r.rho * r.rho) * r.kappa_min;
    r.r1 = mixed_norm(truth, kernel, 1.0);
    r.r2 = mixed_norm(truth, kernel, 2.0);
    r.r_inf = mixed_norm(truth, kernel, std::numeric_limits<double>::infinity());
    r.rate_exponent = rate_exponent(kernel.s(), truth.q);
    r.minimax_l2 = minimax_reference(kernel.s(), truth.q, MixedNormBall::L2);
    r.minimax_linf = minimax_reference(kernel.s(), truth.q, MixedNormBall::LInf);
    r.entropy_exponent = entropy_exponent(kernel.s(), truth.q);
    return r;
}

nlohmann::json to_json(const DiagnosticsReport& r) {
    return {
        {"index_set", r.index_set},
        {"kappa_min", r.kappa_min},
        {"rho", r.rho},
        {"incoherence_product", r.incoherence_product},
        {"mixed_norms", {{"R1", r.r1}, {"R2", r.r2}, {"Rinf", r.r_inf}}},
        {"exponents",
         {{"rate", r.rate_exponent},
          {"minimax_l2", {{"n", r.minimax_l2.n_exponent}, {"d", r.minimax_l2.d_exponent}}},
          {"minimax_linf", {{"n", r.minimax_linf.n_exponent}, {"d", r.minimax_linf.d_exponent}}},
          {"entropy", r.entropy_exponent}}},
        {"estimates", "empirical norms at the samples, ranges of the Gram matrices"},
    };
}

}  // namespace mklrate
