#include "laet/kernels.hpp"
#include "laet/random.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
    laet::Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = rng.uniform(-1.0, 1.0);
    }
    return v;
}

void BM_GemmNN(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = filled(n * n, 1);
    const auto b = filled(n * n, 2);
    std::vector<double> c(n * n, 0.0);
    for (auto _ : state) {
        laet::kernels::gemm_nn(n, n, n, a.data(), b.data(), c.data());
        benchmark::DoNotOptimize(c.data());
    }
    state.counters["flops"] =
        benchmark::Counter(2.0 * static_cast<double>(n * n * n), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_GemmNN)->RangeMultiplier(2)->Range(16, 256);

void BM_GemmNT(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = filled(n * n, 3);
    const auto b = filled(n * n, 4);
    std::vector<double> c(n * n, 0.0);
    for (auto _ : state) {
        laet::kernels::gemm_nt(n, n, n, d.data(), b.data(), c.data());
        benchmark::DoNotOptimize(c.data());
    }
}
BENCHMARK(BM_GemmNT)->RangeMultiplier(2)->Range(16, 256);

void BM_GemmTN(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto a = filled(n * n, 5);
    const auto d = filled(n * n, 6);
    std::vector<double> c(n * n, 0.0);
    for (auto _ : state) {
        laet::kernels::gemm_tn(n, n, n, a.data(), d.data(), c.data());
        benchmark::DoNotOptimize(c.data());
    }
}
BENCHMARK(BM_GemmTN)->RangeMultiplier(2)->Range(16, 256);

} // namespace
