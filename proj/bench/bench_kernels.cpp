// Gram assembly: serial reference vs OpenMP dense vs factored route.

#include "mklrate/kernel_core.hpp"
#include "mklrate/mkl_solver.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

namespace {

Eigen::MatrixXd inputs(int n, int M) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd x(n, M);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    return x;
}

constexpr int kKernels = 4;

template <class Assemble>
void run_assembly(benchmark::State& state, Assemble assemble) {
    const int n = static_cast<int>(state.range(0));
    const auto kernel = mklrate::SpectralKernel::power_law(0.5, 128);
    const std::vector<mklrate::SpectralKernel> kernels(kKernels, kernel);
    const Eigen::MatrixXd x = inputs(n, kKernels);
    for (auto _ : state) {
        auto g = assemble(kernels, x);
        benchmark::DoNotOptimize(g);
    }
    state.SetComplexityN(n);
}

void BM_GramSerial(benchmark::State& state) {
    run_assembly(state, [](const auto& k, const auto& x) { return mklrate::assemble_gram_serial(k, x); });
}

void BM_GramParallel(benchmark::State& state) {
    run_assembly(state, [](const auto& k, const auto& x) { return mklrate::assemble_gram(k, x); });
}

void BM_GramFactored(benchmark::State& state) {
    run_assembly(state, [](const auto& k, const auto& x) { return mklrate::assemble_gram_factored(k, x); });
}

void BM_Solve(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto kernel = mklrate::SpectralKernel::power_law(0.5, 128);
    const std::vector<mklrate::SpectralKernel> kernels(kKernels, kernel);
    const Eigen::MatrixXd x = inputs(n, kKernels);
    const auto g = mklrate::assemble_gram_factored(kernels, x);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = std::cos(3.0 * x(i, 0)) + 0.5 * std::sin(5.0 * x(i, 1));
    mklrate::RegularizationPlan plan;
    plan.lambda2 = 0.01;
    plan.lambda3 = 0.01;
    plan.lambda1 = 0.1 * mklrate::compute_lambda_max(y, g, plan.lambda2);
    for (auto _ : state) {
        auto sol = mklrate::solve(y, g, plan);
        benchmark::DoNotOptimize(sol);
    }
}

}  // namespace

BENCHMARK(BM_GramSerial)->RangeMultiplier(2)->Range(128, 512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GramParallel)->RangeMultiplier(2)->Range(128, 1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GramFactored)->RangeMultiplier(2)->Range(128, 1024)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Solve)->RangeMultiplier(4)->Range(128, 2048)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
