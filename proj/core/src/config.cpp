#include "laet/config.hpp"

#include "laet/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <istream>
#include <map>

namespace laet {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw InvalidArgument("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                          std::string(expected) + ")");
}

std::size_t to_size(std::string_view key, std::string_view v) {
    std::size_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        bad_value(key, v, "a non-negative integer");
    }
    return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        bad_value(key, v, "a non-negative integer");
    }
    return out;
}

double to_double(std::string_view key, std::string_view v) {
    double out = 0.0;
    if (!parse_decimal(v, out)) {
        bad_value(key, v, "a finite number");
    }
    return out;
}

bool to_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1") {
        return true;
    }
    if (v == "false" || v == "0") {
        return false;
    }
    bad_value(key, v, "true or false");
}

SynthSpec& synth_of(ExperimentConfig& c) {
    if (!c.synth) {
        c.synth.emplace();
    }
    return *c.synth;
}

template <typename F>
auto wrap(std::string_view key, std::string_view value, F&& parse) {
    try {
        return parse(value);
    } catch (const InvalidArgument& e) {
        throw InvalidArgument(std::string(key) + ": " + e.what());
    }
}

std::string num(double v) { return fmt::format("{}", v); }

} // namespace

ProbeConfig ExperimentConfig::desk_probe_defaults() {
    ProbeConfig p;
    p.epochs = 100;
    p.lr = 0.05;
    return p;
}

FinetuneConfig ExperimentConfig::desk_finetune_defaults() {
    FinetuneConfig f;
    f.epochs = 10;
    f.model_lr = 1e-3;
    f.classifier_lr = 1e-2;
    return f;
}

void ExperimentConfig::set(std::string_view key, std::string_view value) {
    value = trim(value);
    if (key == "data.path") {
        data_path = std::filesystem::path(std::string(value));
    } else if (key == "data.task") {
        task_mode = wrap(key, value, parse_task_mode);
    } else if (key == "synth.task") {
        synth_of(*this).task = wrap(key, value, parse_synth_task);
    } else if (key == "synth.size") {
        synth_of(*this).size = to_size(key, value);
    } else if (key == "synth.classes") {
        synth_of(*this).classes = to_size(key, value);
    } else if (key == "synth.noise") {
        synth_of(*this).noise = to_double(key, value);
    } else if (key == "model.layers") {
        model.layers = to_size(key, value);
    } else if (key == "model.dim") {
        model.dim = to_size(key, value);
    } else if (key == "model.heads") {
        model.heads = to_size(key, value);
    } else if (key == "model.max_context") {
        model.max_context = to_size(key, value);
    } else if (key == "model.ff_dim") {
        model.ff_dim = to_size(key, value);
    } else if (key == "probe.strategy") {
        readout = wrap(key, value, parse_readout);
    } else if (key == "probe.epochs") {
        probe.epochs = to_size(key, value);
    } else if (key == "probe.lr") {
        probe.lr = to_double(key, value);
    } else if (key == "probe.batch_size") {
        probe.batch_size = to_size(key, value);
    } else if (key == "probe.schedule_t0") {
        probe.schedule_t0 = to_double(key, value);
    } else if (key == "probe.clip_norm") {
        probe.clip_norm = to_double(key, value);
    } else if (key == "probe.validation_fraction") {
        probe.validation_fraction = to_double(key, value);
    } else if (key == "probe.mode") {
        probe.mode = wrap(key, value, parse_probe_mode);
    } else if (key == "probe.metric2") {
        probe.metric2 = wrap(key, value, parse_second_metric);
    } else if (key == "selection.strategy") {
        selection.strategy = wrap(key, value, parse_selection_strategy);
    } else if (key == "selection.alpha") {
        selection.alpha = to_double(key, value);
    } else if (key == "selection.beta") {
        selection.beta = to_double(key, value);
    } else if (key == "selection.all_layers") {
        all_layers = to_bool(key, value);
    } else if (key == "finetune.epochs") {
        finetune.epochs = to_size(key, value);
    } else if (key == "finetune.model_lr") {
        finetune.model_lr = to_double(key, value);
    } else if (key == "finetune.classifier_lr") {
        finetune.classifier_lr = to_double(key, value);
    } else if (key == "finetune.weight_decay") {
        finetune.weight_decay = to_double(key, value);
    } else if (key == "finetune.batch_size") {
        finetune.batch_size = to_size(key, value);
    } else if (key == "finetune.schedule_t0") {
        finetune.schedule_t0 = to_double(key, value);
    } else if (key == "finetune.clip_norm") {
        finetune.clip_norm = to_double(key, value);
    } else if (key == "split.train") {
        split.train = to_double(key, value);
    } else if (key == "split.validation") {
        split.validation = to_double(key, value);
    } else if (key == "split.test") {
        split.test = to_double(key, value);
    } else if (key == "sweep.grid") {
        sweep_grid = wrap(key, value, parse_grid);
    } else if (key == "seed") {
        seed = to_u64(key, value);
    } else if (key == "out") {
        out = std::filesystem::path(std::string(value));
    } else if (key == "threads") {
        threads = to_size(key, value);
    } else {
        throw InvalidArgument("unknown configuration key '" + std::string(key) + "'");
    }
}

void ExperimentConfig::validate() const {
    if (!synth && data_path.empty()) {
        throw InvalidArgument("no data source: set data.path or synth.task");
    }
    if (!synth && !std::filesystem::is_regular_file(data_path)) {
        throw InvalidArgument("dataset file " + data_path.string() + " does not exist");
    }
    if (synth) {
        synth->validate();
    }
    model.validate();
    probe.validate();
    selection.validate();
    finetune.validate();
    const double total = split.train + split.validation + split.test;
    if (!(split.train > 0.0 && split.validation > 0.0 && split.test > 0.0) || total > 1.0 + 1e-9) {
        throw InvalidArgument("split fractions must be positive and sum to at most 1");
    }
    if (threads == 0) {
        throw InvalidArgument("threads must be at least 1");
    }
    if (sweep_grid.empty()) {
        throw InvalidArgument("sweep grid must not be empty");
    }
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
    std::map<std::string, std::string> m;
    m["data.path"] = data_path.string();
    m["data.task"] = task_mode == TaskMode::Auto             ? "auto"
                     : task_mode == TaskMode::Classification ? "classification"
                                                             : "regression";
    if (synth) {
        m["synth.task"] = std::string(to_string(synth->task));
        m["synth.size"] = std::to_string(synth->size);
        m["synth.classes"] = std::to_string(synth->classes);
        m["synth.noise"] = num(synth->noise);
    }
    m["model.layers"] = std::to_string(model.layers);
    m["model.dim"] = std::to_string(model.dim);
    m["model.heads"] = std::to_string(model.heads);
    m["model.max_context"] = std::to_string(model.max_context);
    m["model.ff_dim"] = std::to_string(model.ff_dim);
    m["probe.strategy"] = std::string(to_string(readout));
    m["probe.epochs"] = std::to_string(probe.epochs);
    m["probe.lr"] = num(probe.lr);
    m["probe.batch_size"] = std::to_string(probe.batch_size);
    m["probe.schedule_t0"] = num(probe.schedule_t0);
    m["probe.clip_norm"] = num(probe.clip_norm);
    m["probe.validation_fraction"] = num(probe.validation_fraction);
    m["probe.mode"] = std::string(to_string(probe.mode));
    m["probe.metric2"] = std::string(to_string(probe.metric2));
    m["selection.strategy"] = std::string(to_string(selection.strategy));
    m["selection.alpha"] = num(selection.alpha);
    m["selection.beta"] = num(selection.beta);
    m["selection.all_layers"] = all_layers ? "true" : "false";
    m["finetune.epochs"] = std::to_string(finetune.epochs);
    m["finetune.model_lr"] = num(finetune.model_lr);
    m["finetune.classifier_lr"] = num(finetune.classifier_lr);
    m["finetune.weight_decay"] = num(finetune.weight_decay);
    m["finetune.batch_size"] = std::to_string(finetune.batch_size);
    m["finetune.schedule_t0"] = num(finetune.schedule_t0);
    m["finetune.clip_norm"] = num(finetune.clip_norm);
    m["split.train"] = num(split.train);
    m["split.validation"] = num(split.validation);
    m["split.test"] = num(split.test);
    std::string grid;
    for (const auto& [a, b] : sweep_grid) {
        grid += (grid.empty() ? "" : ",") + num(a) + ":" + num(b);
    }
    m["sweep.grid"] = grid;
    m["seed"] = std::to_string(seed);
    m["out"] = out.string();
    m["threads"] = std::to_string(threads);
    return {m.begin(), m.end()};
}

std::vector<std::pair<double, double>> parse_grid(std::string_view text) {
    std::vector<std::pair<double, double>> grid;
    while (!text.empty()) {
        const auto comma = text.find(',');
        const std::string_view cell = trim(text.substr(0, comma));
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
        const auto colon = cell.find(':');
        double a = 0.0;
        double b = 0.0;
        if (colon == std::string_view::npos || !parse_decimal(trim(cell.substr(0, colon)), a) ||
            !parse_decimal(trim(cell.substr(colon + 1)), b) || a < 0.0 || b < 0.0) {
            throw InvalidArgument("grid cell '" + std::string(cell) + "' is not alpha:beta");
        }
        grid.emplace_back(a, b);
    }
    if (grid.empty()) {
        throw InvalidArgument("grid is empty");
    }
    return grid;
}

ExperimentConfig parse_config(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        view = trim(view);
        if (view.empty()) {
            continue;
        }
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(line_no, "expected 'key = value'");
        }
        try {
            cfg.set(trim(view.substr(0, eq)), view.substr(eq + 1));
        } catch (const InvalidArgument& e) {
            throw ParseError(line_no, e.what());
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("cannot open config " + path.string());
    }
    ExperimentConfig cfg = parse_config(in);
    if (!cfg.data_path.empty() && cfg.data_path.is_relative()) {
        cfg.data_path = path.parent_path() / cfg.data_path;
    }
    return cfg;
}

} // namespace laet
