#include <cmath>

#include <benchmark/benchmark.h>

#include "tapscope/amp.hpp"
#include "tapscope/maxmin.hpp"
#include "tapscope/quadrature.hpp"
#include "tapscope/sf_conditional.hpp"
#include "tapscope/state_evolution.hpp"
#include "tapscope/tap.hpp"

using namespace tapscope;

namespace {

ModelInstance instance(int n)
{
    ModelParams p;
    p.n = n;
    return make_instance(p, 1);
}

void BM_SampleGoe(benchmark::State& st)
{
    const int n = static_cast<int>(st.range(0));
    std::uint64_t seed = 0;
    for (auto _ : st) benchmark::DoNotOptimize(sample_goe(n, ++seed));
}
BENCHMARK(BM_SampleGoe)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Amp(benchmark::State& st)
{
    const ModelInstance inst = instance(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(run_amp_z2(inst, 12));
}
BENCHMARK(BM_Amp)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_FixedPoint(benchmark::State& st)
{
    const double lambda = st.range(0) / 10.0;
    solve_fixed_point(lambda, 0.3, 0.0);  // builds and caches the Hermite rule
    for (auto _ : st) benchmark::DoNotOptimize(solve_fixed_point(lambda, 0.3, 0.0));
}
BENCHMARK(BM_FixedPoint)->Arg(15)->Arg(30)->Unit(benchmark::kMicrosecond);

void BM_HermiteExpectation(benchmark::State& st)
{
    const int order = static_cast<int>(st.range(0));
    double a = 0.0;
    for (auto _ : st) {
        a += 1e-9;
        benchmark::DoNotOptimize(gaussian_expectation([a](double t) { return std::tanh(a + t); }, 1.0, 2.0, order));
    }
}
BENCHMARK(BM_HermiteExpectation)->Arg(200)->Arg(1440);

void BM_MinEigBatch(benchmark::State& st)
{
    const int n = static_cast<int>(st.range(0)), pts = static_cast<int>(st.range(1));
    const ModelInstance inst = instance(n);
    const double q = solve_fixed_point(1.5, 0.3, 1.0).q_inf;
    const TapContext ctx(inst, q);
    const AmpTrace tr = run_amp_z2(inst, 12);
    std::vector<Eigen::VectorXd> us;
    for (int i = 0; i < pts; ++i) us.push_back(tr.M.col(11 - (i % 4)));
    EigOptions o;
    o.method = EigMethod::Lobpcg;
    for (auto _ : st) benchmark::DoNotOptimize(min_eig_scaled_hessian_batch(ctx, us, o));
}
BENCHMARK(BM_MinEigBatch)->Args({2000, 1})->Args({2000, 8})->Unit(benchmark::kMillisecond);

void BM_Conditioning(benchmark::State& st)
{
    const ModelInstance inst = instance(2000);
    const AmpTrace tr = run_amp_z2(inst, 12);
    for (auto _ : st) benchmark::DoNotOptimize(build_conditioning(tr, inst));
}
BENCHMARK(BM_Conditioning)->Unit(benchmark::kMillisecond);

void BM_MarginSearch(benchmark::State& st)
{
    const ScalarParams p = make_scalar_params(1.5, 0.3, Variant::FMM);
    for (auto _ : st) benchmark::DoNotOptimize(margin_search(p, default_alpha_grid()));
}
BENCHMARK(BM_MarginSearch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
