#include "laet/graph.hpp"
#include "laet/model.hpp"
#include "laet/ops.hpp"
#include "laet/tokenizer.hpp"

#include <benchmark/benchmark.h>

#include <string>

namespace {

laet::ModelConfig desk_model() {
    laet::ModelConfig c;
    c.layers = 8;
    c.dim = 64;
    c.heads = 4;
    c.max_context = 128;
    return c;
}

std::vector<std::size_t> prompt(std::size_t length) {
    return laet::Tokenizer{}.tokenize(std::string(length, 'q'), length);
}

void BM_ForwardAllLayers(benchmark::State& state) {
    const laet::LayeredModel model(desk_model(), 1);
    const auto tokens = prompt(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.forward_all_layers(tokens));
    }
}
BENCHMARK(BM_ForwardAllLayers)->Arg(16)->Arg(64)->Arg(128)->Unit(benchmark::kMicrosecond);

// Cost of one training example as the trainable set grows from the top.
void BM_ForwardBackward(benchmark::State& state) {
    laet::LayeredModel model(desk_model(), 1);
    const auto trainable = static_cast<std::size_t>(state.range(0));
    std::vector<std::size_t> layers;
    for (std::size_t l = 9 - trainable; l <= 8; ++l) {
        layers.push_back(l);
    }
    model.set_trainable(layers);
    const auto tokens = prompt(64);
    for (auto _ : state) {
        laet::Graph g;
        const auto states = model.forward(g, tokens, 8);
        g.backward(laet::ops::sum(g, states.back()));
        benchmark::DoNotOptimize(states.size());
    }
}
BENCHMARK(BM_ForwardBackward)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

} // namespace
