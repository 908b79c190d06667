#pragma once

#include "laet/config.hpp"
#include "laet/probe.hpp"
#include "laet/random.hpp"
#include "laet/selection.hpp"

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace laet::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("laet-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline LayerMetricsTable random_table(Rng& rng, std::size_t layers) {
    LayerMetricsTable t;
    for (std::size_t l = 0; l < layers; ++l) {
        t.rows.push_back({rng.uniform(), rng.uniform()});
    }
    return t;
}

// Seconds-scale pipeline configuration on the keyword task.
inline ExperimentConfig tiny_config(const std::filesystem::path& out, std::uint64_t seed = 5) {
    ExperimentConfig c;
    SynthSpec s;
    s.size = 120;
    s.classes = 3;
    c.synth = s;
    c.model.layers = 3;
    c.model.dim = 16;
    c.model.heads = 2;
    c.model.max_context = 64;
    c.probe.epochs = 8;
    c.finetune.epochs = 2;
    c.seed = seed;
    c.out = out;
    return c;
}

// Two linearly separable classes: the first coordinate is offset by +-2 and
// every coordinate carries uniform jitter in [-0.5, 0.5).
inline ProbeDataset separable_blobs(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    ProbeDataset d;
    d.task = TaskKind::Classification;
    d.num_classes = 2;
    Tensor x({n, dim});
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = i % 2;
        d.labels.push_back(label);
        for (std::size_t j = 0; j < dim; ++j) {
            x.at(i, j) = rng.uniform(-0.5, 0.5);
        }
        x.at(i, 0) += label == 1 ? 2.0 : -2.0;
    }
    d.layers.push_back(std::move(x));
    return d;
}

} // namespace laet::testing
