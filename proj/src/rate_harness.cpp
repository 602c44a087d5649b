#include "mklrate/rate_harness.hpp"

#include "mklrate/errors.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace mklrate {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class T>
T required(const nlohmann::json& j, const char* field) {
    if (!j.contains(field)) throw ParameterError(field, "required field is missing");
    try {
        return j.at(field).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParameterError(field, "has the wrong type");
    }
}

template <class T>
T optional_field(const nlohmann::json& j, const char* field, T fallback) {
    if (!j.contains(field)) return fallback;
    try {
        return j.at(field).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParameterError(field, "has the wrong type");
    }
}

std::uint64_t parse_seed(const nlohmann::json& j, std::uint64_t fallback) {
    if (!j.contains("seed")) return fallback;
    const auto& v = j.at("seed");
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_string()) {
        const std::string text = v.get<std::string>();
        std::size_t used = 0;
        try {
            const auto seed = std::stoull(text, &used);
            if (used == text.size()) return seed;
        } catch (const std::exception&) {
        }
    }
    throw ParameterError("seed", "must be a nonnegative integer or a decimal string");
}

std::vector<SpectralKernel> kernel_list(const SpectralKernel& kernel, int M) {
    return std::vector<SpectralKernel>(static_cast<std::size_t>(M), kernel);
}

double truncation_floor(const ExperimentConfig& c, const SpectralKernel& kernel, const TruthModel& truth) {
    // Continue the same power law past the truncation and sum the f-energy
    // the truncated construction omits.
    const int K = kernel.truncation();
    double shape_sq = 0.0;
    for (int k = 1; k <= K; ++k) shape_sq += 1.0 / (static_cast<double>(k) * k);
    double tail = 0.0;
    for (int k = K + 1; k <= 64 * K; ++k) {
        const double mu = kernel.normalization() * std::pow(k, -1.0 / c.s);
        tail += std::pow(mu, 1.0 + c.q) / (static_cast<double>(k) * k);
    }
    double total = 0.0;
    for (int rank = 1; rank <= truth.active_count; ++rank) {
        const double target = profile_norm(truth.profile, rank);
        total += target * target * tail / shape_sq;
    }
    return total;
}

CellResult run_cell(const ExperimentConfig& c, const SpectralKernel& kernel, const TruthModel& truth, double r2,
                    double scale, int n, int rep) {
    CellResult cell;
    cell.n = n;
    cell.rep = rep;
    cell.seed = cell_seed(c.seed, n, rep);
    const auto start = std::chrono::steady_clock::now();
    try {
        const RegressionSample sample = sample_data(truth, kernel, n, c.noise, cell.seed);
        const auto kernels = kernel_list(kernel, c.M);
        const GramSet gram = assemble_gram_factored(kernels, sample.inputs);
        cell.lambda_bar = policy_lambda_bar(c, n, r2);
        const RegularizationPlan plan = theory_plan(n, c.M, c.s, cell.lambda_bar, c.lambda_policy.t, scale);
        cell.lambda1 = plan.lambda1;
        SolveOptions opts;
        opts.tol = c.tol;
        opts.max_sweeps = c.max_sweeps;
        const MklSolution sol = solve(sample.labels, gram, plan, opts);
        cell.sweeps = sol.sweeps_used;
        if (c.test_policy.kind == TestPolicy::Kind::Exact) {
            cell.err_l2sq = exact_l2_error(sol, truth, kernel, sample.inputs);
        } else {
            cell.err_l2sq = monte_carlo_l2_error(sol, truth, kernel, sample.inputs, c.test_policy.n_test,
                                                 mix_seed(cell.seed, 0x7e57))
                                .mean;
        }
        cell.zero_err = truth.f_l2_norm_sq();
        cell.lambda_max = compute_lambda_max(sample.labels, gram, plan.lambda2);
        if (plan.lambda1 < cell.lambda_max) cell.beats_zero = cell.err_l2sq <= cell.zero_err;
        cell.support_ok = sol.active_estimate == truth.active_set;
        if (!sol.converged) {
            cell.failed = true;
            cell.failure = "sweep budget exhausted (kkt " + fmt17(sol.kkt_residual) + ")";
        }
    } catch (const std::exception& e) {
        cell.failed = true;
        cell.failure = e.what();
    }
    cell.runtime_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return cell;
}

int resolve_jobs(int jobs) { return jobs > 0 ? jobs : std::max(1, omp_get_max_threads()); }

}  // namespace

void ExperimentConfig::validate() const {
    if (!(s > 0.0 && s < 1.0)) throw ParameterError("s", "must lie in (0, 1)");
    if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("q", "must lie in [0, 1]");
    if (M < 2) throw ParameterError("M", "must be at least 2");
    if (d < 1) throw ParameterError("d", "must be at least 1");
    if (d > M) throw ParameterError("d", "must not exceed M");
    if (!(noise_bound >= 0.0) || !std::isfinite(noise_bound)) throw ParameterError("noise_bound", "must be >= 0");
    if (n_grid.empty()) throw ParameterError("n_grid", "must be nonempty");
    for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (n_grid[i] < 2) throw ParameterError("n_grid", "sample sizes must be >= 2");
        if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ParameterError("n_grid", "must be strictly increasing");
    }
    if (replications < 1) throw ParameterError("replications", "must be at least 1");
    if (!(lambda_policy.scale > 0.0)) throw ParameterError("lambda_policy.scale", "must be positive");
    if (!(lambda_policy.lambda_bar_scale > 0.0))
        throw ParameterError("lambda_policy.lambda_bar_scale", "must be positive");
    if (!(lambda_policy.t >= 1.0)) throw ParameterError("lambda_policy.t", "must be >= 1");
    if (lambda_policy.kind == LambdaPolicy::Kind::Pilot) {
        if (lambda_policy.pilot_scales.empty()) throw ParameterError("lambda_policy.pilot_scales", "must be nonempty");
        for (double v : lambda_policy.pilot_scales)
            if (!(v > 0.0)) throw ParameterError("lambda_policy.pilot_scales", "must be positive");
    }
    if (test_policy.kind == TestPolicy::Kind::MonteCarlo && test_policy.n_test < 1)
        throw ParameterError("test_policy.n_test", "must be at least 1");
    if (truncation < 1) throw ParameterError("truncation", "must be at least 1");
    if (!(tol > 0.0)) throw ParameterError("tol", "must be positive");
    if (max_sweeps < 1) throw ParameterError("max_sweeps", "must be at least 1");
}

ExperimentConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ParameterError("config", "must be a JSON object");
    ExperimentConfig c;
    c.s = required<double>(j, "s");
    c.q = required<double>(j, "q");
    c.d = required<int>(j, "d");
    c.M = required<int>(j, "M");
    c.profile = parse_profile(required<std::string>(j, "profile"));
    c.n_grid = required<std::vector<int>>(j, "n_grid");
    c.noise_bound = optional_field<double>(j, "noise_bound", c.noise_bound);
    c.noise = parse_noise_kind(optional_field<std::string>(j, "noise", std::string(to_string(c.noise))));
    c.replications = optional_field<int>(j, "replications", c.replications);
    c.seed = parse_seed(j, c.seed);
    c.truncation = optional_field<int>(j, "truncation", c.truncation);
    c.tol = optional_field<double>(j, "tol", c.tol);
    c.max_sweeps = optional_field<int>(j, "max_sweeps", c.max_sweeps);

    if (j.contains("lambda_policy")) {
        const auto& lp = j.at("lambda_policy");
        if (!lp.is_object()) throw ParameterError("lambda_policy", "must be an object");
        const auto kind = optional_field<std::string>(lp, "kind", "theory");
        if (kind == "theory")
            c.lambda_policy.kind = LambdaPolicy::Kind::Theory;
        else if (kind == "pilot")
            c.lambda_policy.kind = LambdaPolicy::Kind::Pilot;
        else
            throw ParameterError("lambda_policy.kind", "expected 'theory' or 'pilot'");
        c.lambda_policy.scale = optional_field<double>(lp, "scale", c.lambda_policy.scale);
        c.lambda_policy.lambda_bar_scale =
            optional_field<double>(lp, "lambda_bar_scale", c.lambda_policy.lambda_bar_scale);
        c.lambda_policy.t = optional_field<double>(lp, "t", c.lambda_policy.t);
        c.lambda_policy.pilot_scales =
            optional_field<std::vector<double>>(lp, "pilot_scales", c.lambda_policy.pilot_scales);
    }
    if (j.contains("test_policy")) {
        const auto& tp = j.at("test_policy");
        if (!tp.is_object()) throw ParameterError("test_policy", "must be an object");
        const auto kind = optional_field<std::string>(tp, "kind", "exact");
        if (kind == "exact")
            c.test_policy.kind = TestPolicy::Kind::Exact;
        else if (kind == "monte_carlo")
            c.test_policy.kind = TestPolicy::Kind::MonteCarlo;
        else
            throw ParameterError("test_policy.kind", "expected 'exact' or 'monte_carlo'");
        c.test_policy.n_test = optional_field<int>(tp, "n_test", c.test_policy.n_test);
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
    return {
        {"s", c.s},
        {"q", c.q},
        {"d", c.d},
        {"M", c.M},
        {"profile", to_string(c.profile)},
        {"noise_bound", c.noise_bound},
        {"noise", to_string(c.noise)},
        {"n_grid", c.n_grid},
        {"replications", c.replications},
        {"lambda_policy",
         {{"kind", c.lambda_policy.kind == LambdaPolicy::Kind::Theory ? "theory" : "pilot"},
          {"scale", c.lambda_policy.scale},
          {"lambda_bar_scale", c.lambda_policy.lambda_bar_scale},
          {"t", c.lambda_policy.t},
          {"pilot_scales", c.lambda_policy.pilot_scales}}},
        // String form keeps 64-bit seeds exact for JSON readers that use doubles.
        {"seed", std::to_string(c.seed)},
        {"test_policy",
         {{"kind", c.test_policy.kind == TestPolicy::Kind::Exact ? "exact" : "monte_carlo"},
          {"n_test", c.test_policy.n_test}}},
        {"truncation", c.truncation},
        {"tol", c.tol},
        {"max_sweeps", c.max_sweeps},
    };
}

std::vector<Eigen::VectorXd> fitted_coefficients(const MklSolution& solution, const SpectralKernel& kernel,
                                                 const Eigen::MatrixXd& inputs) {
    if (solution.alpha_blocks.size() != static_cast<std::size_t>(inputs.cols()))
        throw ParameterError("solution", "block count does not match input arity");
    const auto mu = kernel.eigenvalues();
    const Eigen::Map<const Eigen::VectorXd> mu_vec(mu.data(), static_cast<Eigen::Index>(mu.size()));
    std::vector<Eigen::VectorXd> out;
    for (std::size_t m = 0; m < solution.alpha_blocks.size(); ++m) {
        const auto& alpha = solution.alpha_blocks[m];
        if (alpha.size() != inputs.rows()) throw ParameterError("solution", "block length does not match inputs");
        if (!alpha.any()) {
            out.push_back(Eigen::VectorXd::Zero(kernel.truncation()));
            continue;
        }
        const Eigen::MatrixXd phi = basis_matrix(kernel, inputs.col(static_cast<Eigen::Index>(m)));
        out.push_back((mu_vec.array() * (phi.transpose() * alpha).array()).matrix());
    }
    return out;
}

double exact_l2_error(const MklSolution& solution, const TruthModel& truth, const SpectralKernel& kernel,
                      const Eigen::MatrixXd& inputs) {
    if (inputs.cols() != truth.kernel_count) throw ParameterError("truth", "kernel count mismatch");
    const auto coeffs = fitted_coefficients(solution, kernel, inputs);
    double err = 0.0;
    for (int m = 0; m < truth.kernel_count; ++m) {
        const auto target = truth.f_component(m, kernel.truncation());
        if (target.size() != static_cast<std::size_t>(kernel.truncation()))
            throw ParameterError("truth", "coefficient length does not match the kernel truncation");
        const auto& c = coeffs[static_cast<std::size_t>(m)];
        for (Eigen::Index k = 0; k < c.size(); ++k) {
            const double diff = c[k] - target[static_cast<std::size_t>(k)];
            err += diff * diff;
        }
    }
    return err;
}

Eigen::VectorXd predict(const MklSolution& solution, const SpectralKernel& kernel, const Eigen::MatrixXd& train_inputs,
                        const Eigen::MatrixXd& points) {
    if (points.cols() != train_inputs.cols()) throw ParameterError("points", "input arity mismatch");
    const Eigen::Index n = train_inputs.rows();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(points.rows());
    for (Eigen::Index m = 0; m < train_inputs.cols(); ++m) {
        const auto& alpha = solution.alpha_blocks[static_cast<std::size_t>(m)];
        if (!alpha.any()) continue;
#pragma omp parallel for schedule(static)
        for (Eigen::Index p = 0; p < points.rows(); ++p) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) acc += alpha[i] * evaluate_kernel(kernel, train_inputs(i, m), points(p, m));
            out[p] += acc;
        }
    }
    return out;
}

MonteCarloEstimate monte_carlo_l2_error(const MklSolution& solution, const TruthModel& truth,
                                        const SpectralKernel& kernel, const Eigen::MatrixXd& inputs, int n_test,
                                        std::uint64_t seed) {
    if (n_test < 2) throw ParameterError("n_test", "must be at least 2");
    std::mt19937_64 rng(seed);
    Eigen::MatrixXd points(n_test, inputs.cols());
    for (int i = 0; i < n_test; ++i)
        for (Eigen::Index m = 0; m < inputs.cols(); ++m) points(i, m) = uniform01(rng);
    const Eigen::VectorXd diff = predict(solution, kernel, inputs, points) - evaluate_truth(truth, kernel, points);
    const Eigen::ArrayXd sq = diff.array().square();
    const double mean = sq.mean();
    const double var = (sq - mean).square().sum() / (n_test - 1);
    return {mean, std::sqrt(var / n_test)};
}

SlopeFit fit_loglog(const std::vector<double>& ns, const std::vector<double>& values) {
    if (ns.size() != values.size() || ns.size() < 2) throw ParameterError("fit", "need at least two points");
    const auto k = static_cast<double>(ns.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (!(ns[i] > 0.0) || !(values[i] > 0.0)) throw ParameterError("fit", "log-log fit needs positive values");
        mx += std::log(ns[i]);
        my += std::log(values[i]);
    }
    mx /= k;
    my /= k;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const double dx = std::log(ns[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(values[i]) - my);
    }
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (ns.size() > 2) {
        double sse = 0.0;
        for (std::size_t i = 0; i < ns.size(); ++i) {
            const double r = std::log(values[i]) - (fit.intercept + fit.slope * std::log(ns[i]));
            sse += r * r;
        }
        fit.standard_error = std::sqrt(sse / (k - 2.0) / sxx);
    }
    return fit;
}

double policy_lambda_bar(const ExperimentConfig& config, int n, double r2) {
    return config.lambda_policy.lambda_bar_scale * lambda_star(config.d, n, config.s, config.q, r2);
}

std::uint64_t cell_seed(std::uint64_t base, int n, int rep) {
    return mix_seed(mix_seed(base, static_cast<std::uint64_t>(n)), static_cast<std::uint64_t>(rep));
}

double pilot_scale(const ExperimentConfig& config) {
    config.validate();
    const SpectralKernel kernel = SpectralKernel::power_law(config.s, config.truncation);
    const TruthModel truth = build_truth(kernel, config.M, config.d, config.q, config.profile, config.noise_bound);
    const double r2 = mixed_norm(truth, kernel, 2.0);
    const int n = config.n_grid.front();
    const RegressionSample train = sample_data(truth, kernel, n, config.noise, mix_seed(config.seed, 0x9170'7001));
    const RegressionSample valid = sample_data(truth, kernel, n, config.noise, mix_seed(config.seed, 0x9170'7002));
    const auto kernels = kernel_list(kernel, config.M);
    const GramSet gram = assemble_gram_factored(kernels, train.inputs);
    const double lambda_bar = policy_lambda_bar(config, n, r2);

    double best_scale = config.lambda_policy.pilot_scales.front();
    double best_mse = std::numeric_limits<double>::infinity();
    for (double scale : config.lambda_policy.pilot_scales) {
        const auto plan = theory_plan(n, config.M, config.s, lambda_bar, config.lambda_policy.t, scale);
        SolveOptions opts;
        opts.tol = config.tol;
        opts.max_sweeps = config.max_sweeps;
        const MklSolution sol = solve(train.labels, gram, plan, opts);
        const auto coeffs = fitted_coefficients(sol, kernel, train.inputs);
        Eigen::VectorXd pred = Eigen::VectorXd::Zero(valid.inputs.rows());
        for (int m = 0; m < config.M; ++m) {
            if (!coeffs[static_cast<std::size_t>(m)].any()) continue;
            pred += basis_matrix(kernel, valid.inputs.col(m)) * coeffs[static_cast<std::size_t>(m)];
        }
        const double mse = (valid.labels - pred).squaredNorm() / static_cast<double>(valid.labels.size());
        if (mse < best_mse) {
            best_mse = mse;
            best_scale = scale;
        }
    }
    return best_scale;
}

RateReport run_sweep(const ExperimentConfig& config, int jobs, bool with_diagnostics) {
    config.validate();
    const SpectralKernel kernel = SpectralKernel::power_law(config.s, config.truncation);
    const TruthModel truth = build_truth(kernel, config.M, config.d, config.q, config.profile, config.noise_bound);
    const double r2 = mixed_norm(truth, kernel, 2.0);

    RateReport report;
    report.config = config;
    report.scale_used =
        config.lambda_policy.kind == LambdaPolicy::Kind::Pilot ? pilot_scale(config) : config.lambda_policy.scale;
    report.reference_exponent = -rate_exponent(config.s, config.q);
    report.truncation_floor = truncation_floor(config, kernel, truth);

    const auto sizes = static_cast<int>(config.n_grid.size());
    const int total = sizes * config.replications;
    report.rows.resize(static_cast<std::size_t>(total));
    const int threads = resolve_jobs(jobs);
    // Largest n first so the expensive cells start early; each result lands
    // in its own slot, so the report does not depend on completion order.
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (int job = 0; job < total; ++job) {
        const int idx = total - 1 - job;
        const int ni = idx / config.replications;
        const int rep = idx % config.replications;
        report.rows[static_cast<std::size_t>(idx)] =
            run_cell(config, kernel, truth, r2, report.scale_used, config.n_grid[static_cast<std::size_t>(ni)], rep);
    }

    std::vector<double> fit_n;
    std::vector<double> fit_err;
    for (int ni = 0; ni < sizes; ++ni) {
        SizeSummary s;
        s.n = config.n_grid[static_cast<std::size_t>(ni)];
        s.secondary_term = config.d * std::log(static_cast<double>(config.M)) / s.n;
        std::vector<double> errs;
        for (int rep = 0; rep < config.replications; ++rep) {
            const auto& cell = report.rows[static_cast<std::size_t>(ni * config.replications + rep)];
            if (cell.failed) continue;
            errs.push_back(cell.err_l2sq);
        }
        s.count = static_cast<int>(errs.size());
        if (!errs.empty()) {
            double acc = 0.0;
            for (double e : errs) acc += e;
            s.mean_error = acc / s.count;
            double var = 0.0;
            for (double e : errs) var += (e - s.mean_error) * (e - s.mean_error);
            s.sd_error = s.count > 1 ? std::sqrt(var / (s.count - 1)) : 0.0;
            if (s.mean_error > 0.0) {
                fit_n.push_back(s.n);
                fit_err.push_back(s.mean_error);
            }
        }
        report.per_n.push_back(s);
    }
    for (const auto& cell : report.rows) {
        if (cell.failed) ++report.failed_cells;
        if (!cell.failed && !cell.beats_zero) ++report.beats_zero_violations;
    }
    if (report.failed_cells * 20 > total) {
        std::ostringstream os;
        os << report.failed_cells << " of " << total << " cells failed";
        for (const auto& cell : report.rows)
            if (cell.failed) {
                os << "; first failure (n=" << cell.n << ", rep=" << cell.rep << "): " << cell.failure;
                break;
            }
        throw SolverError(os.str());
    }
    if (fit_n.size() >= 4) report.fit = fit_loglog(fit_n, fit_err);

    if (with_diagnostics) {
        const RegressionSample sample =
            sample_data(truth, kernel, config.n_grid.front(), config.noise, mix_seed(config.seed, 0xd1a6));
        const auto kernels = kernel_list(kernel, config.M);
        const GramSet gram = assemble_gram_factored(kernels, sample.inputs);
        report.diagnostics = diagnose(gram, truth, kernel, truth.active_set);
    }
    return report;
}

ProfileComparison compare_profiles(const ExperimentConfig& a, const ExperimentConfig& b, int jobs) {
    if (a.profile == b.profile) throw ParameterError("profile", "the two configs must use different profiles");
    ExperimentConfig b_aligned = b;
    b_aligned.profile = a.profile;
    if (!(a == b_aligned)) throw ParameterError("config", "configs may differ only in profile");

    const ExperimentConfig& inh = a.profile == NormProfile::Inhomogeneous ? a : b;
    const ExperimentConfig& hom = a.profile == NormProfile::Homogeneous ? a : b;
    ProfileComparison out;
    out.inhomogeneous = run_sweep(inh, jobs, false);
    out.homogeneous = run_sweep(hom, jobs, false);
    out.all_not_worse = true;
    for (std::size_t i = 0; i < inh.n_grid.size(); ++i) {
        ProfileRow row;
        row.n = inh.n_grid[i];
        row.mean_inhomogeneous = out.inhomogeneous.per_n[i].mean_error;
        row.mean_homogeneous = out.homogeneous.per_n[i].mean_error;
        row.ratio = row.mean_homogeneous > 0.0 ? row.mean_inhomogeneous / row.mean_homogeneous : 1.0;
        row.inhomogeneous_not_worse = row.mean_inhomogeneous <= row.mean_homogeneous;
        out.all_not_worse = out.all_not_worse && row.inhomogeneous_not_worse;
        out.rows.push_back(row);
    }

    const SpectralKernel kernel = SpectralKernel::power_law(inh.s, inh.truncation);
    auto ratio = [&](NormProfile profile) {
        const TruthModel t = build_truth(kernel, inh.M, inh.d, inh.q, profile, inh.noise_bound);
        const double r2 = mixed_norm(t, kernel, 2.0);
        const double rinf = mixed_norm(t, kernel, std::numeric_limits<double>::infinity());
        const double e = 1.0 / (1.0 + inh.q + inh.s);
        return std::pow(inh.d, (1.0 + inh.q) * e - 1.0) * std::pow(r2 / rinf, 2.0 * inh.s * e);
    };
    out.reference_ratio_inhomogeneous = ratio(NormProfile::Inhomogeneous);
    out.reference_ratio_homogeneous = ratio(NormProfile::Homogeneous);
    return out;
}

nlohmann::json summary_json(const RateReport& report) {
    nlohmann::json per_n = nlohmann::json::array();
    for (const auto& s : report.per_n) {
        per_n.push_back({{"n", s.n},
                         {"mean_err_l2sq", s.mean_error},
                         {"sd_err_l2sq", s.sd_error},
                         {"cells", s.count},
                         {"secondary_term", s.secondary_term}});
    }
    nlohmann::json j = {
        {"config", to_json(report.config)},
        {"scale_used", report.scale_used},
        {"reference_exponent", report.reference_exponent},
        {"per_n", std::move(per_n)},
        {"failed_cells", report.failed_cells},
        {"beats_zero_violations", report.beats_zero_violations},
        {"truncation_floor", report.truncation_floor},
    };
    if (report.fit) {
        j["fitted_exponent"] = report.fit->slope;
        j["exponent_se"] = report.fit->standard_error;
    } else {
        j["fitted_exponent"] = nullptr;
        j["exponent_se"] = nullptr;
    }
    if (report.diagnostics) j["diagnostics"] = to_json(*report.diagnostics);
    return j;
}

nlohmann::json to_json(const ProfileComparison& c) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : c.rows) {
        rows.push_back({{"n", r.n},
                        {"mean_inhomogeneous", r.mean_inhomogeneous},
                        {"mean_homogeneous", r.mean_homogeneous},
                        {"ratio", r.ratio},
                        {"inhomogeneous_not_worse", r.inhomogeneous_not_worse}});
    }
    return {
        {"rows", std::move(rows)},
        {"all_not_worse", c.all_not_worse},
        {"reference_ratio_inhomogeneous", c.reference_ratio_inhomogeneous},
        {"reference_ratio_homogeneous", c.reference_ratio_homogeneous},
        {"inhomogeneous", summary_json(c.inhomogeneous)},
        {"homogeneous", summary_json(c.homogeneous)},
    };
}

std::string results_csv(const RateReport& report) {
    const auto& c = report.config;
    std::ostringstream os;
    os << "n,rep,seed,s,q,d,M,profile,lambda_bar,lambda1,err_l2sq,support_ok,sweeps,runtime_ms\n";
    for (const auto& r : report.rows) {
        os << r.n << ',' << r.rep << ',' << r.seed << ',' << fmt17(c.s) << ',' << fmt17(c.q) << ',' << c.d << ','
           << c.M << ',' << to_string(c.profile) << ',' << fmt17(r.lambda_bar) << ',' << fmt17(r.lambda1) << ','
           << (r.failed ? std::string("nan") : fmt17(r.err_l2sq)) << ',' << (r.support_ok ? 1 : 0) << ','
           << r.sweeps << ',' << fmt17(r.runtime_ms) << '\n';
    }
    return os.str();
}

void write_atomically(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << contents;
        out.flush();
        if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace mklrate
