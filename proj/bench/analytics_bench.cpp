// Serial reference vs OpenMP for the Mann-Whitney kernels.
//   ./analytics_bench --benchmark_filter=Tail

#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "parsons/rng.hpp"
#include "parsons/stats_kernels.hpp"

namespace k = parsons::stats::kernels;

namespace {

std::vector<double> sample(std::uint64_t seed, std::size_t n) {
    parsons::SplitMix64 rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(rng.below(1000)) / 10.0;
    return v;
}

template <double (*Fn)(std::span<const double>, std::span<const double>)>
void pairwise(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = sample(1, n), b = sample(2, n);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

template <k::TailCount (*Fn)(std::span<const std::int64_t>, std::size_t, std::int64_t)>
void tail(benchmark::State& state) {
    const auto n1 = static_cast<std::size_t>(state.range(0));
    std::vector<std::int64_t> ranks(2 * n1);
    std::iota(ranks.begin(), ranks.end(), std::int64_t{1});
    for (auto& r : ranks) r *= 2;
    const auto n = static_cast<std::int64_t>(n1);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(ranks, n1, n * n / 2));
    state.counters["threads"] = k::max_threads();
}

}  // namespace

BENCHMARK(pairwise<k::serial::pairwise_u>)->Name("PairwiseU/serial")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(pairwise<k::omp::pairwise_u>)->Name("PairwiseU/omp")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(tail<k::serial::enumerate_tail>)->Name("Tail/serial")->DenseRange(8, 12, 2)->Unit(benchmark::kMillisecond);
BENCHMARK(tail<k::omp::enumerate_tail>)->Name("Tail/omp")->DenseRange(8, 12, 2)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
