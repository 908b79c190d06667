#pragma once

#include "laet/dataset.hpp"
#include "laet/finetune.hpp"
#include "laet/model.hpp"
#include "laet/probe.hpp"
#include "laet/selection.hpp"
#include "laet/synth.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace laet {

// Everything a run needs. Stage seeds (synthetic data, split, model init,
// probe, finetune) are derived from `seed`.
struct ExperimentConfig {
    std::filesystem::path data_path;
    TaskMode task_mode = TaskMode::Auto;
    std::optional<SynthSpec> synth;

    ModelConfig model;
    Readout readout = Readout::LastToken;
    ProbeConfig probe = desk_probe_defaults();
    SelectionConfig selection;
    bool all_layers = false; // skip selection and train/vote with every layer
    FinetuneConfig finetune = desk_finetune_defaults();
    SplitFractions split;

    std::uint64_t seed = 0;
    std::filesystem::path out = "laet-out";
    std::size_t threads = 1;

    // Sweep grid as (alpha, beta) pairs.
    std::vector<std::pair<double, double>> sweep_grid = {{0.3, 0.3}, {0.5, 0.5}, {0.7, 0.7}};

    static ProbeConfig desk_probe_defaults();
    static FinetuneConfig desk_finetune_defaults();

    // Sets one dotted key. Throws InvalidArgument for unknown keys or bad values.
    void set(std::string_view key, std::string_view value);

    // Throws InvalidArgument when no data source is given, the dataset file is
    // missing, or a numeric field is out of range.
    void validate() const;

    // Flat (key, value) listing of every setting, in key order.
    [[nodiscard]] std::vector<std::pair<std::string, std::string>> entries() const;
};

// `key = value` lines; '#' starts a comment. Errors carry the line number.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

// "0.3:0.3,0.5:0.5"
std::vector<std::pair<double, double>> parse_grid(std::string_view text);

} // namespace laet
