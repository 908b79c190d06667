#include "laet/checkpoint.hpp"
#include "laet/config.hpp"
#include "laet/error.hpp"
#include "laet/pipeline.hpp"
#include "laet/synth.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitFailure = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<double> alpha;
    std::optional<double> beta;
    std::string selection;
    std::string strategy;
    std::string data;
    std::string synth;
    std::optional<std::size_t> size;
    std::optional<std::size_t> classes;
    std::optional<double> noise;
    std::optional<std::size_t> threads;
    bool all_layers = false;
    std::vector<std::string> sets;
    std::string checkpoint;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "key = value configuration file");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("--data", f.data, "JSONL dataset");
    cmd->add_option("--synth", f.synth, "synthetic task: keyword | suffix");
    cmd->add_option("--size", f.size, "synthetic dataset size");
    cmd->add_option("--classes", f.classes, "synthetic class count");
    cmd->add_option("--noise", f.noise, "synthetic label-noise fraction");
    cmd->add_option("--threads", f.threads, "worker threads");
    cmd->add_option("--set", f.sets, "extra key=value settings, applied last");
}

void add_selection(CLI::App* cmd, Flags& f) {
    cmd->add_option("--alpha", f.alpha, "margin coefficient for metric 1");
    cmd->add_option("--beta", f.beta, "margin coefficient for metric 2");
    cmd->add_option("--selection", f.selection, "dominance | threshold | first-std");
    cmd->add_flag("--all-layers", f.all_layers, "train and vote with every layer");
}

void add_strategy(CLI::App* cmd, Flags& f) { cmd->add_option("--strategy", f.strategy, "probe readout: lt | sat | avt"); }

void add_checkpoint(CLI::App* cmd, Flags& f) {
    cmd->add_option("--checkpoint", f.checkpoint, "checkpoint file (default: <out>/checkpoint.laet)");
}

laet::ExperimentConfig build_config(const Flags& f) {
    try {
        laet::ExperimentConfig cfg = f.config.empty() ? laet::ExperimentConfig{} : laet::load_config(f.config);
        if (!f.data.empty()) {
            cfg.data_path = f.data;
            cfg.synth.reset();
        }
        if (!f.synth.empty()) {
            cfg.set("synth.task", f.synth);
        }
        if (f.size) {
            cfg.set("synth.size", std::to_string(*f.size));
        }
        if (f.classes) {
            cfg.set("synth.classes", std::to_string(*f.classes));
        }
        if (f.noise) {
            cfg.set("synth.noise", fmt::format("{}", *f.noise));
        }
        if (f.seed) {
            cfg.seed = *f.seed;
        }
        if (!f.out.empty()) {
            cfg.out = f.out;
        }
        if (f.alpha) {
            cfg.selection.alpha = *f.alpha;
        }
        if (f.beta) {
            cfg.selection.beta = *f.beta;
        }
        if (!f.selection.empty()) {
            cfg.set("selection.strategy", f.selection);
        }
        if (f.all_layers) {
            cfg.all_layers = true;
        }
        if (!f.strategy.empty()) {
            cfg.set("probe.strategy", f.strategy);
        }
        if (f.threads) {
            cfg.threads = *f.threads;
        }
        for (const auto& kv : f.sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw laet::InvalidArgument("--set expects key=value, got '" + kv + "'");
            }
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        cfg.validate();
        return cfg;
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

std::filesystem::path checkpoint_path(const Flags& f, const laet::ExperimentConfig& cfg) {
    return f.checkpoint.empty() ? cfg.out / "checkpoint.laet" : std::filesystem::path(f.checkpoint);
}

void print_selection(const laet::SelectionResult& s) {
    std::string layers;
    for (const auto l : s.selected) {
        layers += (layers.empty() ? "" : " ") + std::to_string(l);
    }
    fmt::print("selected ({}, alpha={}, beta={}): {}\n", laet::to_string(s.strategy), s.alpha, s.beta, layers);
}

void print_evaluation(const laet::Evaluation& ev, laet::TaskKind task) {
    if (task == laet::TaskKind::Classification) {
        fmt::print("test accuracy {:.4f}  macro-F1 {:.4f}  MCC {:.4f}\n", ev.test.accuracy, ev.test.macro_f1,
                   ev.test.mcc);
    } else {
        fmt::print("test RMSE {:.6f}\n", ev.test.rmse);
    }
    fmt::print("trainable parameters {} of {} ({:.2f}%)\n", ev.parameters.trainable, ev.parameters.total,
               100.0 * ev.parameters.fraction);
}

void cmd_synth(const Flags& f) {
    const auto cfg = build_config(f);
    if (!cfg.synth) {
        throw UsageError("synth needs --synth keyword|suffix");
    }
    std::filesystem::create_directories(cfg.out);
    const auto path = cfg.out / "synth.jsonl";
    laet::write_jsonl(path, laet::synth_records(cfg));
    fmt::print("wrote {}\n", path.string());
}

void cmd_probe(const Flags& f) {
    const auto cfg = build_config(f);
    const auto data = laet::prepare_data(cfg);
    const auto phase = laet::run_probe_phase(cfg, data);
    std::filesystem::create_directories(cfg.out);
    laet::write_file(cfg.out / "layer_metrics.json", laet::layer_metrics_json(phase.run.table));
    laet::write_file(cfg.out / "layer_metrics.csv", laet::layer_metrics_csv(phase.run.table));
    laet::save_checkpoint(cfg.out / "probe.laet", phase.model, phase.run.classifier,
                          {{}, cfg.readout, data.codec.classes()});
    fmt::print("{}", laet::layer_metrics_csv(phase.run.table));
}

void cmd_select(const Flags& f) {
    const auto cfg = build_config(f);
    const auto table = laet::parse_layer_metrics_json(laet::read_file(cfg.out / "layer_metrics.json"));
    const auto selection = laet::select_for(cfg, table);
    laet::write_file(cfg.out / "selection.json", laet::selection_json(selection));
    print_selection(selection);
}

void cmd_finetune(const Flags& f) {
    const auto cfg = build_config(f);
    const auto data = laet::prepare_data(cfg);
    laet::Checkpoint probed = laet::load_checkpoint(cfg.out / "probe.laet");
    laet::SelectionResult selection;
    selection.selected = laet::parse_selection_json(laet::read_file(cfg.out / "selection.json"));
    laet::FinetuneConfig fc = cfg.finetune;
    fc.seed = laet::finetune_seed(cfg.seed);
    fc.readout = cfg.readout;
    const auto trace = laet::finetune(probed.model, probed.classifier, selection, data.train, fc, cfg.threads);
    laet::save_checkpoint(checkpoint_path(f, cfg), probed.model, probed.classifier,
                          {selection.selected, cfg.readout, data.codec.classes()});
    for (std::size_t e = 0; e < trace.epochs.size(); ++e) {
        fmt::print("epoch {} loss {:.6f}\n", e + 1, trace.epochs[e].loss);
    }
}

laet::Evaluation evaluate_checkpoint(const Flags& f, laet::ExperimentConfig& cfg, laet::PreparedData& data) {
    cfg = build_config(f);
    data = laet::prepare_data(cfg);
    const laet::Checkpoint ckpt = laet::load_checkpoint(checkpoint_path(f, cfg));
    if (ckpt.meta.selected.empty()) {
        throw laet::InvalidArgument("checkpoint has no selected layers; run finetune first");
    }
    return laet::evaluate(ckpt.model, ckpt.classifier, ckpt.meta.selected, ckpt.meta.readout, data, cfg.threads);
}

void cmd_predict(const Flags& f) {
    laet::ExperimentConfig cfg;
    laet::PreparedData data;
    const auto ev = evaluate_checkpoint(f, cfg, data);
    std::filesystem::create_directories(cfg.out);
    laet::write_file(cfg.out / "predictions.jsonl", laet::predictions_jsonl(ev.predictions, data.codec));
    fmt::print("wrote {} predictions\n", ev.predictions.size());
}

void cmd_report(const Flags& f) {
    laet::ExperimentConfig cfg;
    laet::PreparedData data;
    const auto ev = evaluate_checkpoint(f, cfg, data);
    std::filesystem::create_directories(cfg.out);
    laet::write_file(cfg.out / "evaluation.json", laet::evaluation_json(ev, data.codec.task()));
    print_evaluation(ev, data.codec.task());
}

void cmd_pipeline(const Flags& f) {
    const auto cfg = build_config(f);
    const auto result = laet::run_pipeline(cfg);
    print_selection(result.report.selection);
    print_evaluation(result.report.evaluation, result.report.task);
    fmt::print("outputs in {}\n", cfg.out.string());
}

void cmd_sweep(const Flags& f) {
    const auto cfg = build_config(f);
    const auto rows = laet::sweep_alpha_beta(cfg);
    fmt::print("{}", laet::read_file(cfg.out / "sweep.csv"));
    for (const auto& r : rows) {
        if (!r.ok) {
            throw std::runtime_error("one or more sweep cells failed");
        }
    }
}

void cmd_strategies(const Flags& f) {
    const auto cfg = build_config(f);
    for (const auto& c : laet::compare_probe_strategies(cfg)) {
        fmt::print("{} mean {} {:.4f}\n", laet::to_string(c.readout), c.table.m1_name, c.mean_m1());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Layer probing, selection and selective fine-tuning of small transformers"};
    app.require_subcommand(1);
    Flags flags;

    struct Command {
        const char* name;
        const char* help;
        void (*run)(const Flags&);
        bool selection;
        bool strategy;
        bool checkpoint;
    };
    const std::vector<Command> commands = {
        {"synth", "write a synthetic dataset as JSONL", cmd_synth, false, false, false},
        {"probe", "probe every layer of the initial model", cmd_probe, false, true, false},
        {"select", "select layers from probe metrics", cmd_select, true, false, false},
        {"finetune", "fine-tune the selected layers and the head", cmd_finetune, false, true, true},
        {"predict", "write test-split predictions of a checkpoint", cmd_predict, false, false, true},
        {"report", "evaluate a checkpoint on the test split", cmd_report, false, false, true},
        {"pipeline", "probe, select, fine-tune and evaluate", cmd_pipeline, true, true, false},
        {"sweep", "run the pipeline over an alpha/beta grid", cmd_sweep, true, true, false},
        {"strategies", "compare LT, SaT and AvT probing", cmd_strategies, false, false, false},
    };
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, flags);
        if (c.selection) {
            add_selection(sub, flags);
        }
        if (c.strategy) {
            add_strategy(sub, flags);
        }
        if (c.checkpoint) {
            add_checkpoint(sub, flags);
        }
        subs.emplace_back(sub, &c);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    for (const auto& [sub, cmd] : subs) {
        if (!sub->parsed()) {
            continue;
        }
        try {
            cmd->run(flags);
            return 0;
        } catch (const UsageError& e) {
            std::fprintf(stderr, "laet %s: %s\n", cmd->name, e.what());
            return kExitUsage;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "laet %s: %s\n", cmd->name, e.what());
            return kExitFailure;
        }
    }
    return kExitUsage;
}
