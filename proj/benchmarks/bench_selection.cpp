#include "laet/random.hpp"
#include "laet/selection.hpp"

#include <benchmark/benchmark.h>

namespace {

laet::LayerMetricsTable random_table(std::size_t layers) {
    laet::Rng rng(9);
    laet::LayerMetricsTable t;
    for (std::size_t i = 0; i < layers; ++i) {
        t.rows.push_back({rng.uniform(), rng.uniform()});
    }
    return t;
}

void BM_SelectLayers(benchmark::State& state) {
    const auto table = random_table(static_cast<std::size_t>(state.range(0)));
    laet::SelectionConfig config;
    config.strategy = static_cast<laet::SelectionStrategy>(state.range(1));
    for (auto _ : state) {
        benchmark::DoNotOptimize(laet::select_layers(table, config));
    }
}
BENCHMARK(BM_SelectLayers)->ArgsProduct({{8, 32, 128}, {0, 1, 2}});

} // namespace
