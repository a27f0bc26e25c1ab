#include "dmatch/densities.hpp"
#include "dmatch/kde.hpp"
#include "dmatch/kde_kernels.hpp"
#include "dmatch/models.hpp"
#include "dmatch/objective.hpp"

#include <memory>
#include <vector>

#include <benchmark/benchmark.h>

using namespace dmatch;

namespace {

std::vector<double> draws(std::size_t m)
{
    return sample(Distribution::gaussian(3.5, 0.12), 1, m).values;
}

// Args: grid nodes, samples.
void BM_DensityReference(benchmark::State& state)
{
    const QuadratureGrid grid(0.0, 7.0, static_cast<std::size_t>(state.range(0)));
    const auto s = draws(static_cast<std::size_t>(state.range(1)));
    const double h = scott_bandwidth(s);
    std::vector<double> out(grid.size());
    for (auto _ : state) {
        kernels::density_reference(s, h, grid, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

void BM_DensityParallel(benchmark::State& state)
{
    const QuadratureGrid grid(0.0, 7.0, static_cast<std::size_t>(state.range(0)));
    const auto s = draws(static_cast<std::size_t>(state.range(1)));
    const double h = scott_bandwidth(s);
    std::vector<double> out(grid.size());
    for (auto _ : state) {
        kernels::density_parallel(s, h, grid, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

void BM_ContractReference(benchmark::State& state)
{
    const QuadratureGrid grid(0.0, 7.0, static_cast<std::size_t>(state.range(0)));
    const auto s = draws(static_cast<std::size_t>(state.range(1)));
    const double h = scott_bandwidth(s);
    const std::vector<double> coeff(grid.size(), 1.0);
    std::vector<double> out(s.size());
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernels::contract_reference(s, h, grid, coeff, out));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

void BM_ContractParallel(benchmark::State& state)
{
    const QuadratureGrid grid(0.0, 7.0, static_cast<std::size_t>(state.range(0)));
    const auto s = draws(static_cast<std::size_t>(state.range(1)));
    const double h = scott_bandwidth(s);
    const std::vector<double> coeff(grid.size(), 1.0);
    std::vector<double> out(s.size());
    for (auto _ : state) {
        benchmark::DoNotOptimize(kernels::contract_parallel(s, h, grid, coeff, out));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

// One objective-plus-gradient evaluation at the airfoil problem size.
void BM_AirfoilObjective(benchmark::State& state)
{
    const auto model = std::make_shared<SyntheticAirfoilModel>();
    const auto omegas = sample(model->uncertainty(), 7, static_cast<std::size_t>(state.range(0))).values;
    const DensityObjective obj(model, Distribution::scaled_beta(1.5, 3.5, 50.0, 80.0),
                               QuadratureGrid(-100.0, 150.0, 2500), omegas, BandwidthPolicy::fixed(1.0));
    const std::vector<double> s(16, 0.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(obj.evaluate(s, true).value);
    }
}

} // namespace

BENCHMARK(BM_DensityReference)->Args({1000, 10000})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DensityParallel)->Args({1000, 10000})->Args({10000, 100000})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ContractReference)->Args({1000, 10000})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ContractParallel)->Args({1000, 10000})->Args({10000, 100000})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AirfoilObjective)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
