#include <benchmark/benchmark.h>

#include <vector>

#include "gfrag/branching.hpp"
#include "gfrag/families.hpp"
#include "gfrag/pdmp.hpp"
#include "gfrag/spectral.hpp"
#include "gfrag/spine.hpp"

namespace {

void BM_HittingBatch(benchmark::State& state) {
    const gfrag::ModelSpec m = gfrag::make_family("hump");
    const auto n = static_cast<std::size_t>(state.range(0));
    std::uint64_t seed = 1;
    for (auto _ : state) {
        auto batch = gfrag::sample_hitting_batch(m, 1.0, 1.0, 256.0, n, {seed++, 1});
        benchmark::DoNotOptimize(batch.size());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_HittingBatch)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_PopulationRun(benchmark::State& state) {
    const gfrag::ModelSpec m = gfrag::make_family("hump");
    gfrag::SimulationOptions o;
    o.horizon = static_cast<double>(state.range(0));
    o.record_labels = false;
    std::uint64_t replicate = 0;
    std::size_t fissions = 0;
    for (auto _ : state) {
        gfrag::RandomStream rng(2, gfrag::StreamTag::population, replicate++);
        const auto run = gfrag::simulate_population(m, 1.0, o, rng);
        fissions += run.fissions;
    }
    state.counters["fissions/run"] = benchmark::Counter(static_cast<double>(fissions) / state.iterations());
}
BENCHMARK(BM_PopulationRun)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_LaplaceEstimate(benchmark::State& state) {
    const gfrag::ModelSpec m = gfrag::make_family("saturating");
    for (auto _ : state) {
        const auto est = gfrag::estimate_laplace(m, 1.0, 1.0, 0.5, 5000, 64.0, {3, 1});
        benchmark::DoNotOptimize(est.mean);
    }
}
BENCHMARK(BM_LaplaceEstimate)->Unit(benchmark::kMillisecond);

void BM_SpinePath(benchmark::State& state) {
    const gfrag::ModelSpec m = gfrag::make_family("linear");
    const gfrag::SpineModel spine(m, gfrag::HarmonicEstimate(1.0, 0.7, {0.01, 100.0}, {1.0, 1.0}, {0.0, 0.0},
                                                             {0.0, 0.0}));
    const std::vector<double> times{1.0, 2.0, 4.0};
    std::uint64_t replicate = 0;
    for (auto _ : state) {
        gfrag::RandomStream rng(4, gfrag::StreamTag::spine, replicate++);
        benchmark::DoNotOptimize(gfrag::spine_at_times(spine, 1.0, times, rng));
    }
}
BENCHMARK(BM_SpinePath);

}  // namespace

BENCHMARK_MAIN();
