#include "laet/pipeline.hpp"

#include "laet/checkpoint.hpp"
#include "laet/error.hpp"
#include "laet/log.hpp"
#include "laet/metrics.hpp"
#include "laet/random.hpp"
#include "laet/synth.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace laet {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

constexpr std::uint64_t kSynthSalt = 0x53594e;
constexpr std::uint64_t kSplitSalt = 0x53504c;
constexpr std::uint64_t kModelSalt = 0x4d444c;
constexpr std::uint64_t kProbeSalt = 0x505242;
constexpr std::uint64_t kFinetuneSalt = 0x46544e;

template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

double round6(double x) {
    const double r = std::round(x * 1e6) / 1e6;
    return r == 0.0 ? 0.0 : r; // no "-0.0"
}

std::string num(double x) { return fmt::format("{}", round6(x)); }

// Files written by one run; removed again unless the run commits.
class OutputGuard {
public:
    explicit OutputGuard(std::filesystem::path dir) : dir_(std::move(dir)) {
        created_ = !std::filesystem::exists(dir_);
        std::filesystem::create_directories(dir_);
    }
    OutputGuard(const OutputGuard&) = delete;
    OutputGuard& operator=(const OutputGuard&) = delete;

    ~OutputGuard() {
        if (committed_) {
            return;
        }
        std::error_code ec;
        for (const auto& p : written_) {
            std::filesystem::remove(p, ec);
        }
        if (created_) {
            std::filesystem::remove(dir_, ec); // only succeeds when empty
        }
    }

    void write(const std::string& name, const std::string& bytes) {
        const auto path = dir_ / name;
        written_.push_back(path);
        write_file(path, bytes);
    }

    void commit() { committed_ = true; }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> written_;
    bool created_ = false;
    bool committed_ = false;
};

std::vector<std::size_t> all_layer_ids(std::size_t n) {
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), std::size_t{1});
    return ids;
}

Json selection_object(const SelectionResult& s) {
    Json j;
    j["strategy"] = std::string(to_string(s.strategy));
    j["alpha"] = round6(s.alpha);
    j["beta"] = round6(s.beta);
    j["sigma_m1"] = round6(s.margins.sigma_m1);
    j["sigma_m2"] = round6(s.margins.sigma_m2);
    j["delta_m1"] = round6(s.margins.delta_m1);
    j["delta_m2"] = round6(s.margins.delta_m2);
    j["selected"] = s.selected;
    j["fallback"] = s.fallback;
    return j;
}

Json layer_table_object(const LayerMetricsTable& table, bool rounded) {
    Json rows = Json::array();
    for (std::size_t l = 1; l <= table.num_layers(); ++l) {
        const auto& r = table.layer(l);
        rows.push_back({{"layer", l}, {"m1", rounded ? round6(r.m1) : r.m1}, {"m2", rounded ? round6(r.m2) : r.m2}});
    }
    return {{"m1", table.m1_name}, {"m2", table.m2_name}, {"layers", rows}};
}

Json rounded_array(const std::vector<double>& v) {
    Json out = Json::array();
    for (const double x : v) {
        out.push_back(round6(x));
    }
    return out;
}

Json evaluation_object(const Evaluation& ev, TaskKind task) {
    Json j;
    const bool cls = task == TaskKind::Classification;
    if (cls) {
        j["test"] = {{"accuracy", round6(ev.test.accuracy)},
                     {"micro_f1", round6(ev.test.micro_f1)},
                     {"macro_f1", round6(ev.test.macro_f1)},
                     {"mcc", round6(ev.test.mcc)}};
    } else {
        j["test"] = {{"rmse", round6(ev.test.rmse)}};
    }
    const char* m1 = cls ? "accuracy" : "neg_rmse";
    Json per_layer = Json::array();
    for (const auto& s : ev.per_layer) {
        per_layer.push_back({{"layer", s.layer}, {m1, round6(s.m1)}});
    }
    j["per_layer"] = per_layer;
    j["ensemble"] = {{m1, round6(ev.ensemble_m1)}, {"ties", ev.ties}};
    Json bound = {{"kind", "estimated"}, {"ensemble_size", ev.bound.ensemble_size}};
    bound["avg_validation_error"] = cls ? Json(round6(ev.bound.avg_error)) : Json(nullptr);
    bound["value"] = ev.bound.bound ? Json(round6(*ev.bound.bound)) : Json(nullptr);
    j["bound"] = bound;
    j["parameters"] = {{"total", ev.parameters.total},
                       {"per_layer", ev.parameters.per_layer},
                       {"classifier", ev.parameters.classifier},
                       {"trainable", ev.parameters.trainable},
                       {"trainable_fraction", round6(ev.parameters.fraction)}};
    return j;
}

std::string pretty(const Json& j) { return j.dump(2) + "\n"; }

std::string csv_field(std::string s) {
    for (char& c : s) {
        if (c == ',' || c == '\n' || c == '\r') {
            c = ' ';
        }
    }
    return s;
}

std::string join_layers(const std::vector<std::size_t>& layers) {
    std::string out;
    for (const auto l : layers) {
        out += (out.empty() ? "" : ";") + std::to_string(l);
    }
    return out;
}

} // namespace

std::uint64_t synth_seed(std::uint64_t seed) { return derive_seed(seed, kSynthSalt); }
std::uint64_t split_seed(std::uint64_t seed) { return derive_seed(seed, kSplitSalt); }
std::uint64_t model_seed(std::uint64_t seed) { return derive_seed(seed, kModelSalt); }
std::uint64_t probe_seed(std::uint64_t seed) { return derive_seed(seed, kProbeSalt); }
std::uint64_t finetune_seed(std::uint64_t seed) { return derive_seed(seed, kFinetuneSalt); }

std::vector<DatasetRecord> synth_records(const ExperimentConfig& config) {
    if (!config.synth) {
        throw InvalidArgument("no synthetic task configured");
    }
    SynthSpec spec = *config.synth;
    spec.seed = synth_seed(config.seed);
    return synth_generate(spec);
}

PreparedData prepare_data(const ExperimentConfig& config) {
    PreparedData data;
    std::vector<DatasetRecord> records;
    if (config.synth) {
        records = synth_records(config);
        std::vector<std::string> names;
        for (std::size_t c = 0; c < config.synth->classes; ++c) {
            names.push_back(synth_class_name(c));
        }
        data.codec = LabelCodec::classification(std::move(names));
    } else {
        LoadedDataset loaded = load_jsonl(config.data_path, config.task_mode);
        records = std::move(loaded.records);
        data.codec = std::move(loaded.codec);
    }
    data.records = split(records, config.split, split_seed(config.seed), data.codec);
    if (data.records.train.empty() || data.records.validation.empty() || data.records.test.empty()) {
        throw InvalidArgument("dataset of " + std::to_string(records.size()) +
                              " records leaves an empty train, validation or test split");
    }
    data.train = to_labeled_set(data.records.train, data.codec);
    data.validation = to_labeled_set(data.records.validation, data.codec);
    data.test = to_labeled_set(data.records.test, data.codec);
    return data;
}

LayeredModel build_model(const ExperimentConfig& config) { return LayeredModel(config.model, model_seed(config.seed)); }

ProbePhase run_probe_phase(const ExperimentConfig& config, const PreparedData& data) {
    LayeredModel model = build_model(config);
    const ProbeDataset reps = extract_probe_dataset(model, data.train, config.readout, config.threads);
    ProbeConfig pc = config.probe;
    pc.seed = probe_seed(config.seed);
    ProbeRun run = run_probe(reps, pc, config.threads);
    return {std::move(model), std::move(run)};
}

SelectionResult select_for(const ExperimentConfig& config, const LayerMetricsTable& table) {
    if (!config.all_layers) {
        return select_layers(table, config.selection);
    }
    SelectionResult all;
    all.selected = all_layer_ids(table.num_layers());
    all.margins = compute_margins(table, config.selection.alpha, config.selection.beta);
    all.strategy = config.selection.strategy;
    all.alpha = config.selection.alpha;
    all.beta = config.selection.beta;
    return all;
}

ParameterCounts count_parameters(const LayeredModel& model, const ProbeClassifier& classifier,
                                 std::size_t selected_count) {
    ParameterCounts p;
    p.per_layer = model.block_parameter_count();
    p.classifier = classifier.parameter_count();
    p.total = model.parameter_count() + p.classifier;
    p.trainable = selected_count * p.per_layer + p.classifier;
    p.fraction = static_cast<double>(p.trainable) / static_cast<double>(p.total);
    return p;
}

Evaluation evaluate(const LayeredModel& model, const ProbeClassifier& classifier,
                    const std::vector<std::size_t>& selected, Readout readout, const PreparedData& data,
                    std::size_t threads) {
    const LaetPredictor predictor(model, classifier, selected, readout);
    const auto test = predictor.predict_all(data.test, threads);
    const auto validation = predictor.predict_all(data.validation, threads);
    const std::size_t n = test.size();
    const std::size_t b = selected.size();

    Evaluation ev;
    ev.parameters = count_parameters(model, classifier, b);
    ev.bound.ensemble_size = b;
    ev.predictions.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ev.predictions.push_back({i, data.records.test[i].answer, test[i]});
        ev.ties += test[i].tie ? 1 : 0;
    }

    if (data.test.task == TaskKind::Classification) {
        const std::size_t k = data.test.num_classes;
        std::vector<std::size_t> labels(n);
        std::vector<std::size_t> preds(n);
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = data.test.examples[i].label;
            preds[i] = test[i].predicted;
        }
        const auto f1 = metrics::f1_scores(preds, labels, k);
        ev.test.accuracy = metrics::accuracy(preds, labels);
        ev.test.micro_f1 = f1.micro;
        ev.test.macro_f1 = f1.macro;
        ev.test.mcc = metrics::mcc(preds, labels, k);
        ev.ensemble_m1 = ev.test.accuracy;
        for (std::size_t j = 0; j < b; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                preds[i] = test[i].votes[j].predicted;
            }
            ev.per_layer.push_back({selected[j], metrics::accuracy(preds, labels)});
        }

        double error_sum = 0.0;
        const std::size_t nv = validation.size();
        for (std::size_t j = 0; j < b; ++j) {
            std::size_t wrong = 0;
            for (std::size_t i = 0; i < nv; ++i) {
                wrong += validation[i].votes[j].predicted != data.validation.examples[i].label ? 1 : 0;
            }
            error_sum += static_cast<double>(wrong) / static_cast<double>(nv);
        }
        ev.bound.avg_error = error_sum / static_cast<double>(b);
        if (ev.bound.avg_error < 0.5) {
            ev.bound.bound = ensemble_error_bound(ev.bound.avg_error, b);
        }
    } else {
        std::vector<double> targets(n);
        std::vector<double> outputs(n);
        for (std::size_t i = 0; i < n; ++i) {
            targets[i] = data.test.examples[i].target;
            outputs[i] = test[i].output;
        }
        ev.test.rmse = metrics::rmse(outputs, targets);
        ev.ensemble_m1 = -ev.test.rmse;
        for (std::size_t j = 0; j < b; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                outputs[i] = test[i].votes[j].output;
            }
            ev.per_layer.push_back({selected[j], -metrics::rmse(outputs, targets)});
        }
    }
    return ev;
}

std::string report_json(const RunReport& r) {
    Json j;
    Json config = Json::object();
    for (const auto& [k, v] : r.config) {
        config[k] = v;
    }
    j["config"] = config;
    j["data"] = {{"task", std::string(to_string(r.task))},
                 {"classes", r.classes},
                 {"train", r.train_size},
                 {"validation", r.validation_size},
                 {"test", r.test_size}};
    j["layer_metrics"] = layer_table_object(r.layer_metrics, true);
    Json sel = selection_object(r.selection);
    sel["all_layers"] = r.all_layers;
    j["selection"] = sel;
    j["selection_comparison"] = {
        {"dominance", r.dominance}, {"threshold", r.threshold}, {"first_std", r.first_std}};
    Json training;
    training["probe_initial_loss"] = rounded_array(r.probe_initial_loss);
    training["probe_final_loss"] = rounded_array(r.probe_final_loss);
    training["finetune_loss"] = rounded_array(r.finetune_loss);
    training["finetune_epochs"] = r.finetune_loss.size();
    j["training"] = training;
    j["evaluation"] = evaluation_object(r.evaluation, r.task);
    return pretty(j);
}

std::string evaluation_json(const Evaluation& evaluation, TaskKind task) {
    return pretty(evaluation_object(evaluation, task));
}

std::string selection_json(const SelectionResult& selection) { return pretty(selection_object(selection)); }

std::string layer_metrics_json(const LayerMetricsTable& table) { return pretty(layer_table_object(table, false)); }

std::string layer_metrics_csv(const LayerMetricsTable& table) {
    std::string out = "layer," + table.m1_name + "," + table.m2_name + "\n";
    for (std::size_t l = 1; l <= table.num_layers(); ++l) {
        out += fmt::format("{},{},{}\n", l, num(table.layer(l).m1), num(table.layer(l).m2));
    }
    return out;
}

LayerMetricsTable parse_layer_metrics_json(const std::string& text) {
    try {
        const Json j = Json::parse(text);
        LayerMetricsTable table;
        table.m1_name = j.at("m1").get<std::string>();
        table.m2_name = j.at("m2").get<std::string>();
        const auto& rows = j.at("layers");
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].at("layer").get<std::size_t>() != i + 1) {
                throw InvalidArgument("layer rows must be numbered 1..L in order");
            }
            table.rows.push_back({rows[i].at("m1").get<double>(), rows[i].at("m2").get<double>()});
        }
        if (table.rows.empty()) {
            throw InvalidArgument("no layer rows");
        }
        return table;
    } catch (const Json::exception& e) {
        throw InvalidArgument(std::string("malformed layer metrics: ") + e.what());
    }
}

std::vector<std::size_t> parse_selection_json(const std::string& text) {
    try {
        return Json::parse(text).at("selected").get<std::vector<std::size_t>>();
    } catch (const Json::exception& e) {
        throw InvalidArgument(std::string("malformed selection: ") + e.what());
    }
}

std::string predictions_jsonl(const std::vector<PredictionRow>& rows, const LabelCodec& codec) {
    const bool cls = codec.task() == TaskKind::Classification;
    std::string out;
    for (const auto& row : rows) {
        OrderedJson j;
        j["index"] = row.index;
        j["answer"] = row.answer;
        OrderedJson votes = OrderedJson::array();
        if (cls) {
            j["predicted"] = codec.decode(row.prediction.predicted);
            j["tie"] = row.prediction.tie;
            for (const auto& v : row.prediction.votes) {
                votes.push_back({{"layer", v.layer}, {"predicted", codec.decode(v.predicted)}});
            }
        } else {
            j["output"] = row.prediction.output;
            for (const auto& v : row.prediction.votes) {
                votes.push_back({{"layer", v.layer}, {"output", v.output}});
            }
        }
        j["votes"] = votes;
        out += j.dump() + "\n";
    }
    return out;
}

RunResult complete_run(const ExperimentConfig& config, const PreparedData& data, const ProbePhase& phase,
                       const std::filesystem::path& dir) {
    const LayerMetricsTable& table = phase.run.table;
    const SelectionResult selection = stage("select", [&] { return select_for(config, table); });
    log::info("selected layers {}", join_layers(selection.selected));

    LayeredModel model = phase.model;
    ProbeClassifier classifier = phase.run.classifier;
    const TrainingTrace trace = stage("finetune", [&] {
        FinetuneConfig fc = config.finetune;
        fc.seed = finetune_seed(config.seed);
        fc.readout = config.readout;
        return finetune(model, classifier, selection, data.train, fc, config.threads);
    });

    Evaluation ev = stage("evaluate", [&] {
        return evaluate(model, classifier, selection.selected, config.readout, data, config.threads);
    });

    RunReport report;
    // The output location does not affect any result, so reports written to
    // different directories stay byte-identical.
    for (auto& [key, value] : config.entries()) {
        if (key != "out") {
            report.config.emplace_back(key, value);
        }
    }
    report.task = data.codec.task();
    report.classes = data.codec.classes();
    report.train_size = data.train.size();
    report.validation_size = data.validation.size();
    report.test_size = data.test.size();
    report.layer_metrics = table;
    report.all_layers = config.all_layers;
    report.selection = selection;
    SelectionConfig rule = config.selection;
    rule.strategy = SelectionStrategy::Dominance;
    report.dominance = select_layers(table, rule).selected;
    rule.strategy = SelectionStrategy::Threshold;
    report.threshold = select_layers(table, rule).selected;
    report.first_std = select_first_std(table).selected;
    report.probe_initial_loss = phase.run.history.initial_loss;
    if (!phase.run.history.epoch_loss.empty()) {
        report.probe_final_loss = phase.run.history.epoch_loss.back();
    }
    for (const auto& e : trace.epochs) {
        report.finetune_loss.push_back(e.loss);
    }
    report.evaluation = std::move(ev);

    stage("write", [&] {
        OutputGuard out(dir);
        CheckpointMeta meta{selection.selected, config.readout, data.codec.classes()};
        out.write("layer_metrics.json", layer_metrics_json(table));
        out.write("layer_metrics.csv", layer_metrics_csv(table));
        out.write("selection.json", selection_json(selection));
        out.write("checkpoint.laet", serialize_checkpoint(model, classifier, meta));
        out.write("predictions.jsonl", predictions_jsonl(report.evaluation.predictions, data.codec));
        out.write("report.json", report_json(report));
        out.commit();
    });

    return {std::move(report), std::move(model), std::move(classifier), trace};
}

RunResult run_pipeline(const ExperimentConfig& config) {
    stage("config", [&] { config.validate(); });
    const PreparedData data = stage("data", [&] { return prepare_data(config); });
    const ProbePhase phase = stage("probe", [&] { return run_probe_phase(config, data); });
    return complete_run(config, data, phase, config.out);
}

std::string sweep_cell_name(double alpha, double beta) { return fmt::format("alpha{}_beta{}", alpha, beta); }

std::vector<SweepRow> sweep_alpha_beta(const ExperimentConfig& config) {
    stage("config", [&] { config.validate(); });
    const PreparedData data = stage("data", [&] { return prepare_data(config); });
    const ProbePhase phase = stage("probe", [&] { return run_probe_phase(config, data); });

    std::vector<SweepRow> rows;
    for (const auto& [alpha, beta] : config.sweep_grid) {
        SweepRow row;
        row.alpha = alpha;
        row.beta = beta;
        ExperimentConfig cell = config;
        cell.selection.alpha = alpha;
        cell.selection.beta = beta;
        cell.out = config.out / "sweep" / sweep_cell_name(alpha, beta);
        try {
            const RunResult result = complete_run(cell, data, phase, cell.out);
            row.ok = true;
            row.selected = result.report.selection.selected;
            row.parameters = result.report.evaluation.parameters;
            row.test = result.report.evaluation.test;
        } catch (const std::exception& e) {
            row.error = e.what();
            log::error("sweep cell alpha={} beta={} failed: {}", alpha, beta, e.what());
        }
        rows.push_back(std::move(row));
    }
    stage("write", [&] {
        OutputGuard out(config.out);
        out.write("sweep.csv", sweep_csv(rows, data.codec.task()));
        out.commit();
    });
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, TaskKind task) {
    const bool cls = task == TaskKind::Classification;
    std::string out = "alpha,beta,status,selected_count,selected_layers,trainable_parameters,trainable_fraction,";
    out += cls ? "accuracy,macro_f1\n" : "rmse\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},", num(r.alpha), num(r.beta));
        if (!r.ok) {
            out += "failed: " + csv_field(r.error) + (cls ? ",,,,,,\n" : ",,,,,\n");
            continue;
        }
        out += fmt::format("ok,{},{},{},{},", r.selected.size(), join_layers(r.selected), r.parameters.trainable,
                           num(r.parameters.fraction));
        out += cls ? fmt::format("{},{}\n", num(r.test.accuracy), num(r.test.macro_f1)) : num(r.test.rmse) + "\n";
    }
    return out;
}

double StrategyCurve::mean_m1() const {
    double total = 0.0;
    for (const auto& r : table.rows) {
        total += r.m1;
    }
    return table.rows.empty() ? 0.0 : total / static_cast<double>(table.rows.size());
}

std::vector<StrategyCurve> compare_probe_strategies(const ExperimentConfig& config) {
    stage("config", [&] { config.validate(); });
    const PreparedData data = stage("data", [&] { return prepare_data(config); });
    std::vector<StrategyCurve> curves;
    for (const Readout r : {Readout::LastToken, Readout::Sum, Readout::Average}) {
        ExperimentConfig pass = config;
        pass.readout = r;
        curves.push_back({r, stage("probe", [&] { return run_probe_phase(pass, data); }).run.table});
        log::info("{} mean m1 {:.4f}", to_string(r), curves.back().mean_m1());
    }
    stage("write", [&] {
        OutputGuard out(config.out);
        out.write("strategies.csv", strategies_csv(curves));
        out.commit();
    });
    return curves;
}

std::string strategies_csv(const std::vector<StrategyCurve>& curves) {
    std::string header = "layer,strategy,m1,m2\n";
    if (!curves.empty()) {
        header = "layer,strategy," + curves.front().table.m1_name + "," + curves.front().table.m2_name + "\n";
    }
    std::string out = header;
    for (const auto& c : curves) {
        for (std::size_t l = 1; l <= c.table.num_layers(); ++l) {
            out += fmt::format("{},{},{},{}\n", l, to_string(c.readout), num(c.table.layer(l).m1),
                               num(c.table.layer(l).m2));
        }
    }
    return out;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw InvalidArgument("cannot write " + tmp.string());
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw InvalidArgument("write to " + tmp.string() + " failed");
        }
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace laet
