#include "mklrate/cli.hpp"

#include "mklrate/diagnostics.hpp"
#include "mklrate/errors.hpp"
#include "mklrate/rate_harness.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <string>

namespace mklrate {

namespace {

constexpr const char* kCommands[] = {"solve", "sweep", "compare", "diagnose", "spectrum"};

struct CliConfig {
    std::string command;
    std::string config_path;
    std::string output_dir = ".";
    std::optional<std::uint64_t> seed;
    int jobs = 0;
    bool quiet = false;
};

struct Loaded {
    ExperimentConfig config;
    int n = 0;  ///< sample size for single-sample commands
};

Loaded load_config(const CliConfig& cli) {
    std::ifstream in(cli.config_path);
    if (!in) throw ParameterError("config", "cannot open '" + cli.config_path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParameterError("config", std::string("invalid JSON: ") + e.what());
    }
    Loaded loaded;
    loaded.config = parse_config(j);
    if (cli.seed) {
        loaded.config.seed = *cli.seed;
    } else if (!j.contains("seed")) {
        if (const char* env = std::getenv("MKLRATE_SEED")) {
            try {
                std::size_t used = 0;
                const std::string text(env);
                loaded.config.seed = std::stoull(text, &used);
                if (used != text.size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw ParameterError("MKLRATE_SEED", "must be an unsigned integer");
            }
        }
    }
    loaded.n = loaded.config.n_grid.front();
    if (j.contains("n")) {
        if (!j.at("n").is_number_integer() || j.at("n").get<int>() < 2)
            throw ParameterError("n", "must be an integer >= 2");
        loaded.n = j.at("n").get<int>();
    }
    return loaded;
}

struct Problem {
    SpectralKernel kernel;
    TruthModel truth;
    RegressionSample sample;
};

Problem make_problem(const Loaded& loaded) {
    const auto& c = loaded.config;
    SpectralKernel kernel = SpectralKernel::power_law(c.s, c.truncation);
    TruthModel truth = build_truth(kernel, c.M, c.d, c.q, c.profile, c.noise_bound);
    RegressionSample sample = sample_data(truth, kernel, loaded.n, c.noise, c.seed);
    return {std::move(kernel), std::move(truth), std::move(sample)};
}

std::filesystem::path prepare_out(const CliConfig& cli) {
    std::filesystem::path dir(cli.output_dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::ostream& human(std::ostream& os) { return os << std::setprecision(4); }

int cmd_solve(const CliConfig& cli, const Loaded& loaded, std::ostream& out) {
    const auto& c = loaded.config;
    const Problem p = make_problem(loaded);
    const std::vector<SpectralKernel> kernels(static_cast<std::size_t>(c.M), p.kernel);
    const GramSet gram = assemble_gram_factored(kernels, p.sample.inputs);
    const double r2 = mixed_norm(p.truth, p.kernel, 2.0);
    const double lambda_bar = policy_lambda_bar(c, loaded.n, r2);
    const double scale = c.lambda_policy.kind == LambdaPolicy::Kind::Pilot ? pilot_scale(c) : c.lambda_policy.scale;
    const auto plan = theory_plan(loaded.n, c.M, c.s, lambda_bar, c.lambda_policy.t, scale);
    SolveOptions opts;
    opts.tol = c.tol;
    opts.max_sweeps = c.max_sweeps;
    const MklSolution sol = solve(p.sample.labels, gram, plan, opts);
    const double err = exact_l2_error(sol, p.truth, p.kernel, p.sample.inputs);

    nlohmann::json j = to_json(sol);
    j["config"] = to_json(c);
    j["n"] = loaded.n;
    j["err_l2sq"] = err;
    j["truth"] = to_json(p.truth);
    write_atomically(prepare_out(cli) / "solution.json", j.dump(2) + "\n");
    if (!cli.quiet) {
        human(out) << "n = " << loaded.n << "  lambda1 = " << plan.lambda1 << "  lambda_bar = " << lambda_bar << "\n"
                   << "sweeps = " << sol.sweeps_used << (sol.converged ? " (converged)" : " (NOT converged)")
                   << "  kkt = " << sol.kkt_residual << "\n"
                   << "objective = " << sol.final_objective() << "  err_l2sq = " << err << "\n"
                   << "active set:";
        for (int m : sol.active_estimate) out << ' ' << m;
        out << "\n";
    }
    return sol.converged ? 0 : 2;
}

void print_report(std::ostream& out, const RateReport& r) {
    human(out) << "profile " << to_string(r.config.profile) << ", s = " << r.config.s << ", q = " << r.config.q
               << ", d = " << r.config.d << ", M = " << r.config.M << ", scale = " << r.scale_used << "\n";
    for (const auto& s : r.per_n)
        out << "  n = " << std::setw(6) << s.n << "  mean err = " << s.mean_error << "  sd = " << s.sd_error
            << "  cells = " << s.count << "  d log(M)/n = " << s.secondary_term << "\n";
    if (r.fit)
        out << "fitted exponent " << r.fit->slope << " +- " << r.fit->standard_error << "  (reference "
            << r.reference_exponent << ")\n";
    else
        out << "fitted exponent: needs at least 4 grid points  (reference " << r.reference_exponent << ")\n";
    if (r.failed_cells > 0) out << r.failed_cells << " failed cell(s)\n";
}

int cmd_sweep(const CliConfig& cli, const Loaded& loaded, std::ostream& out) {
    const RateReport report = run_sweep(loaded.config, cli.jobs);
    const auto dir = prepare_out(cli);
    write_atomically(dir / "results.csv", results_csv(report));
    write_atomically(dir / "summary.json", summary_json(report).dump(2) + "\n");
    if (!cli.quiet) print_report(out, report);
    return 0;
}

int cmd_compare(const CliConfig& cli, const Loaded& loaded, std::ostream& out) {
    ExperimentConfig other = loaded.config;
    other.profile = loaded.config.profile == NormProfile::Homogeneous ? NormProfile::Inhomogeneous
                                                                      : NormProfile::Homogeneous;
    const ProfileComparison cmp = compare_profiles(loaded.config, other, cli.jobs);
    write_atomically(prepare_out(cli) / "compare.json", to_json(cmp).dump(2) + "\n");
    if (!cli.quiet) {
        for (const auto& row : cmp.rows)
            human(out) << "n = " << std::setw(6) << row.n << "  inhomogeneous " << row.mean_inhomogeneous
                       << "  homogeneous " << row.mean_homogeneous << "  ratio " << row.ratio
                       << (row.inhomogeneous_not_worse ? "" : "  (inhomogeneous worse)") << "\n";
        out << "reference l2/l-inf bound ratio: inhomogeneous " << cmp.reference_ratio_inhomogeneous
            << ", homogeneous " << cmp.reference_ratio_homogeneous << "\n";
    }
    return 0;
}

int cmd_diagnose(const CliConfig& cli, const Loaded& loaded, std::ostream& out) {
    const auto& c = loaded.config;
    const Problem p = make_problem(loaded);
    const std::vector<SpectralKernel> kernels(static_cast<std::size_t>(c.M), p.kernel);
    const GramSet gram = assemble_gram_factored(kernels, p.sample.inputs);
    const DiagnosticsReport r = diagnose(gram, p.truth, p.kernel, p.truth.active_set);
    const double r2 = mixed_norm(p.truth, p.kernel, 2.0);
    const auto plan = theory_plan(loaded.n, c.M, c.s, policy_lambda_bar(c, loaded.n, r2), c.lambda_policy.t,
                                  c.lambda_policy.scale);
    const ConditionProfile cond = theorem1_condition_profile(c.d, loaded.n, c.M, plan, r2, c.q);

    nlohmann::json j = to_json(r);
    j["condition_profile"] = {{"profile", cond.profile}, {"log_condition", cond.log_condition}};
    j["n"] = loaded.n;
    if (!cli.quiet) {
        human(out) << "kappa_min = " << r.kappa_min << "\n"
                   << "rho = " << r.rho << "\n"
                   << "incoherence_product = " << r.incoherence_product << "\n"
                   << "R1 = " << r.r1 << "  R2 = " << r.r2 << "  Rinf = " << r.r_inf << "\n"
                   << "rate exponent = " << r.rate_exponent << "  minimax l2 (n, d) = (" << r.minimax_l2.n_exponent
                   << ", " << r.minimax_l2.d_exponent << ")  minimax linf (n, d) = (" << r.minimax_linf.n_exponent
                   << ", " << r.minimax_linf.d_exponent << ")\n"
                   << "entropy exponent = " << r.entropy_exponent << "\n"
                   << "condition profile = " << cond.profile
                   << "  log(M)/sqrt(n) <= 1: " << (cond.log_condition ? "yes" : "no") << "\n";
    }
    write_atomically(prepare_out(cli) / "diagnostics.json", j.dump(2) + "\n");
    return 0;
}

int cmd_spectrum(const CliConfig& cli, const Loaded& loaded, std::ostream& out) {
    const auto& c = loaded.config;
    const SpectralKernel kernel = SpectralKernel::power_law(c.s, c.truncation);
    const TruthModel truth = build_truth(kernel, c.M, c.d, c.q, c.profile, c.noise_bound);
    const RegressionSample sample = sample_data(truth, kernel, loaded.n, c.noise, c.seed);
    const std::vector<SpectralKernel> one{kernel};
    const GramSet gram = assemble_gram(one, sample.inputs.leftCols(1));
    const auto empirical = empirical_spectrum(gram.block(0).matrix());
    const int show = std::min({16, kernel.truncation(), loaded.n});
    nlohmann::json rows = nlohmann::json::array();
    if (!cli.quiet) out << "     k   empirical   configured   rel.diff\n";
    for (int k = 1; k <= show; ++k) {
        const double e = empirical[static_cast<std::size_t>(k - 1)];
        const double mu = kernel.eigenvalue(k);
        rows.push_back({{"k", k}, {"empirical", e}, {"configured", mu}});
        if (!cli.quiet)
            human(out) << std::setw(6) << k << "  " << std::setw(10) << e << "  " << std::setw(11) << mu << "  "
                       << std::setw(9) << (e - mu) / mu << "\n";
    }
    write_atomically(prepare_out(cli) / "spectrum.json",
                     nlohmann::json{{"n", loaded.n}, {"rows", rows}}.dump(2) + "\n");
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CliConfig cli;
    CLI::App app{"Elastic-net multiple kernel learning: solver and learning-rate experiments", "mklrate"};
    app.add_option("command", cli.command, "solve | sweep | compare | diagnose | spectrum")
        ->required()
        ->check(CLI::IsMember(std::vector<std::string>(std::begin(kCommands), std::end(kCommands))));
    app.add_option("--config", cli.config_path, "experiment config (JSON)")->required();
    app.add_option("--out", cli.output_dir, "output directory");
    app.add_option("--seed", cli.seed, "base seed, overrides the config");
    app.add_option("--jobs", cli.jobs, "worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
    app.add_flag("--quiet", cli.quiet, "suppress the human-readable summary");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return 1;
    }
    if (cli.jobs > 0) omp_set_num_threads(cli.jobs);

    Loaded loaded;
    try {
        loaded = load_config(cli);
    } catch (const ParameterError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return 1;
    }

    try {
        if (cli.command == "solve") return cmd_solve(cli, loaded, out);
        if (cli.command == "sweep") return cmd_sweep(cli, loaded, out);
        if (cli.command == "compare") return cmd_compare(cli, loaded, out);
        if (cli.command == "diagnose") return cmd_diagnose(cli, loaded, out);
        return cmd_spectrum(cli, loaded, out);
    } catch (const ParameterError& e) {
        err << "invalid configuration: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace mklrate
