#pragma once

#include "laet/config.hpp"
#include "laet/dataset.hpp"
#include "laet/ensemble.hpp"
#include "laet/finetune.hpp"
#include "laet/model.hpp"
#include "laet/probe.hpp"
#include "laet/selection.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// End-to-end orchestration: data -> probe -> select -> finetune -> evaluate.
//
// Every stage seed is derived from ExperimentConfig::seed, and reports carry no
// wall-clock values, so a (config, seed) pair fixes every emitted byte.
namespace laet {

// Per-stage seeds.
std::uint64_t synth_seed(std::uint64_t seed);
std::uint64_t split_seed(std::uint64_t seed);
std::uint64_t model_seed(std::uint64_t seed);
std::uint64_t probe_seed(std::uint64_t seed);
std::uint64_t finetune_seed(std::uint64_t seed);

struct PreparedData {
    LabelCodec codec;
    DatasetSplit records;
    LabeledSet train;
    LabeledSet validation;
    LabeledSet test;
};

// Synthesizes or loads the dataset and splits it.
PreparedData prepare_data(const ExperimentConfig& config);

// Synthetic records exactly as the pipeline would generate them.
std::vector<DatasetRecord> synth_records(const ExperimentConfig& config);

LayeredModel build_model(const ExperimentConfig& config);

// Probing output plus the untouched initial model it was computed on.
struct ProbePhase {
    LayeredModel model;
    ProbeRun run;
};

// Extracts train-split representations and runs the probe. Standalone and
// in-pipeline invocations give identical results.
ProbePhase run_probe_phase(const ExperimentConfig& config, const PreparedData& data);

// Selection with the configured rule, or every layer when config.all_layers.
SelectionResult select_for(const ExperimentConfig& config, const LayerMetricsTable& table);

struct TestMetrics {
    double accuracy = 0.0;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double mcc = 0.0;
    double rmse = 0.0; // regression only
};

struct BoundEstimate {
    double avg_error = 0.0;     // mean validation error of the selected layers
    std::size_t ensemble_size = 0;
    std::optional<double> bound; // absent when avg_error >= 0.5 or for regression
};

struct ParameterCounts {
    std::size_t total = 0;      // model plus head
    std::size_t per_layer = 0;  // one transformer block
    std::size_t classifier = 0; // head weights, excluding the fixed input scaler
    std::size_t trainable = 0;  // |B| * per_layer + classifier
    double fraction = 0.0;
};

struct LayerTestScore {
    std::size_t layer = 0;
    double m1 = 0.0; // accuracy, or -RMSE for regression
};

struct PredictionRow {
    std::size_t index = 0;
    std::string answer;
    EnsemblePrediction prediction;
};

// Everything derived from a trained model and head on the held-out splits.
struct Evaluation {
    TestMetrics test;
    std::vector<LayerTestScore> per_layer; // selection order
    double ensemble_m1 = 0.0;
    std::size_t ties = 0;
    BoundEstimate bound;
    ParameterCounts parameters;
    std::vector<PredictionRow> predictions;
};

Evaluation evaluate(const LayeredModel& model, const ProbeClassifier& classifier,
                    const std::vector<std::size_t>& selected, Readout readout, const PreparedData& data,
                    std::size_t threads = 1);

ParameterCounts count_parameters(const LayeredModel& model, const ProbeClassifier& classifier,
                                 std::size_t selected_count);

struct RunReport {
    std::vector<std::pair<std::string, std::string>> config;
    TaskKind task = TaskKind::Classification;
    std::vector<std::string> classes;
    std::size_t train_size = 0;
    std::size_t validation_size = 0;
    std::size_t test_size = 0;
    LayerMetricsTable layer_metrics;
    bool all_layers = false;
    SelectionResult selection;
    // The three rules on the same table at the configured alpha and beta.
    std::vector<std::size_t> dominance;
    std::vector<std::size_t> threshold;
    std::vector<std::size_t> first_std;
    std::vector<double> probe_initial_loss;
    std::vector<double> probe_final_loss;
    std::vector<double> finetune_loss; // per epoch
    Evaluation evaluation;
};

// Pretty JSON with sorted keys and numbers rounded to 6 decimals.
std::string report_json(const RunReport& report);
std::string evaluation_json(const Evaluation& evaluation, TaskKind task);
std::string selection_json(const SelectionResult& selection);
std::string layer_metrics_json(const LayerMetricsTable& table);
std::string layer_metrics_csv(const LayerMetricsTable& table);
std::string predictions_jsonl(const std::vector<PredictionRow>& rows, const LabelCodec& codec);

// Exact inverses of layer_metrics_json and selection_json (selected layers only).
LayerMetricsTable parse_layer_metrics_json(const std::string& text);
std::vector<std::size_t> parse_selection_json(const std::string& text);

struct RunResult {
    RunReport report;
    LayeredModel model;
    ProbeClassifier classifier;
    TrainingTrace trace;
};

// Full run. Writes report.json, layer_metrics.json/.csv, selection.json,
// checkpoint.laet and predictions.jsonl into config.out. Failures raise
// StageError and remove whatever this run had written.
RunResult run_pipeline(const ExperimentConfig& config);

// The post-probing half of run_pipeline, writing into `dir`.
RunResult complete_run(const ExperimentConfig& config, const PreparedData& data, const ProbePhase& phase,
                       const std::filesystem::path& dir);

struct SweepRow {
    double alpha = 0.0;
    double beta = 0.0;
    bool ok = false;
    std::string error;
    std::vector<std::size_t> selected;
    ParameterCounts parameters;
    TestMetrics test;
};

// One shared probe phase, then one completed run per grid cell under
// out/sweep/<cell>/; writes out/sweep.csv. A failing cell is recorded and
// the sweep continues.
std::vector<SweepRow> sweep_alpha_beta(const ExperimentConfig& config);
std::string sweep_csv(const std::vector<SweepRow>& rows, TaskKind task);
std::string sweep_cell_name(double alpha, double beta);

struct StrategyCurve {
    Readout readout = Readout::LastToken;
    LayerMetricsTable table;
    [[nodiscard]] double mean_m1() const;
};

// Three probe passes that differ only in readout; writes out/strategies.csv.
std::vector<StrategyCurve> compare_probe_strategies(const ExperimentConfig& config);
std::string strategies_csv(const std::vector<StrategyCurve>& curves);

// Writes bytes to a sibling temporary file and renames it into place.
void write_file(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

} // namespace laet
