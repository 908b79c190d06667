#pragma once

#include "laet/graph.hpp"
#include "laet/model.hpp"
#include "laet/selection.hpp"
#include "laet/task.hpp"
#include "laet/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace laet {

struct ProbeDataset;

// Feed-forward head d -> 128 -> 64 -> k (one output for regression) with ReLU
// after the first two maps. The same head is shared across layers.
//
// Inputs first pass through a fixed per-layer standardization fitted on the
// probe-train representations; it is state, not a trainable parameter.
class ProbeClassifier {
public:
    static constexpr std::size_t kHidden1 = 128;
    static constexpr std::size_t kHidden2 = 64;

    ProbeClassifier() = default;
    // Weights uniform in +-1/sqrt(fan_in), biases zero.
    ProbeClassifier(std::size_t input_dim, TaskKind task, std::size_t output_dim, std::uint64_t seed);

    [[nodiscard]] std::size_t input_dim() const noexcept { return input_dim_; }
    [[nodiscard]] std::size_t output_dim() const noexcept { return output_dim_; }
    [[nodiscard]] TaskKind task() const noexcept { return task_; }

    // Per-feature mean and inverse standard deviation of every layer of `data`.
    void fit_input_scaler(const ProbeDataset& data);
    // Both [L x d]; empty tensors disable standardization.
    void set_input_scaler(Tensor mean, Tensor inv_std);
    [[nodiscard]] bool has_input_scaler() const noexcept { return !input_mean_.empty(); }
    [[nodiscard]] const Tensor& input_mean() const noexcept { return input_mean_; }
    [[nodiscard]] const Tensor& input_inv_std() const noexcept { return input_inv_std_; }

    // x is [m x d] from 1-based `layer`; returns [m x out]. The non-const
    // overload binds weights as parameters.
    Var forward(Graph& g, Var x, std::size_t layer);
    Var forward(Graph& g, Var x, std::size_t layer) const;

    // Direct evaluation of [m x d] inputs.
    [[nodiscard]] Tensor outputs(const Tensor& x, std::size_t layer) const;

    void for_each_parameter(const std::function<void(const std::string&, const Tensor&)>& fn) const;
    void for_each_parameter(const std::function<void(const std::string&, Tensor&)>& fn);
    [[nodiscard]] std::vector<Tensor*> parameters();

    [[nodiscard]] std::size_t parameter_count() const;
    void set_trainable(bool on);
    void clear_grads();

    [[nodiscard]] bool bitwise_equal(const ProbeClassifier& other) const;

private:
    template <typename Self>
    static Var forward_impl(Self& self, Graph& g, Var x, std::size_t layer);

    TaskKind task_ = TaskKind::Classification;
    std::size_t input_dim_ = 0;
    std::size_t output_dim_ = 0;
    Tensor w1_, b1_, w2_, b2_, w3_, b3_;
    Tensor input_mean_, input_inv_std_;
};

// Cross-entropy against labels for classification, MSE against targets for regression.
Var task_loss(Graph& g, Var outputs, TaskKind task, std::span<const std::size_t> labels,
              std::span<const double> targets);

// Per-layer sequence representations with a shared label sequence.
struct ProbeDataset {
    TaskKind task = TaskKind::Classification;
    std::size_t num_classes = 0;
    std::vector<Tensor> layers; // layers[l - 1] is [N x d]
    std::vector<std::size_t> labels;
    std::vector<double> targets;

    [[nodiscard]] std::size_t size() const noexcept { return task == TaskKind::Classification ? labels.size() : targets.size(); }
    [[nodiscard]] std::size_t num_layers() const noexcept { return layers.size(); }
    [[nodiscard]] std::size_t dim() const noexcept { return layers.empty() ? 0 : layers.front().cols(); }
    [[nodiscard]] std::size_t output_dim() const noexcept {
        return task == TaskKind::Classification ? num_classes : 1;
    }
    // 1-based.
    [[nodiscard]] const Tensor& layer(std::size_t l) const;

    // Rows `indices` of every layer, with their labels.
    [[nodiscard]] ProbeDataset subset(std::span<const std::size_t> indices) const;
};

// Inference-only pass over all layers. Throws InvalidArgument on empty data.
ProbeDataset extract_probe_dataset(const LayeredModel& model, const LabeledSet& data, Readout readout,
                                   std::size_t threads = 1);

enum class ProbeMode { Shared, Independent };
enum class SecondMetric { MacroF1, Mcc };

std::string_view to_string(ProbeMode m);
ProbeMode parse_probe_mode(std::string_view name); // shared | independent
std::string_view to_string(SecondMetric m);
SecondMetric parse_second_metric(std::string_view name); // f1 | mcc

struct ProbeConfig {
    std::size_t epochs = 200;
    double lr = 2e-4;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double schedule_t0 = 0.0; // > 0 enables lr / (1 + epoch / t0)
    double clip_norm = 1.0;   // <= 0 disables clipping
    double validation_fraction = 0.2;
    ProbeMode mode = ProbeMode::Shared;
    SecondMetric metric2 = SecondMetric::MacroF1;

    void validate() const;
};

struct ProbeHistory {
    std::vector<double> initial_loss;            // per layer, before any update
    std::vector<std::vector<double>> epoch_loss; // [epoch][layer - 1], mean over batches
    std::vector<double> grad_norm;               // per epoch, mean pre-clip norm over steps
};

// Shared mode: one head, each epoch cycles over layers and takes an SGD step
// per minibatch of that layer. Throws NumericDivergence on a non-finite loss.
ProbeClassifier train_probe(const ProbeDataset& data, const ProbeConfig& config, ProbeHistory* history = nullptr);

// Trains a head on a single layer (independent mode).
ProbeClassifier train_probe_on_layer(const ProbeDataset& data, std::size_t layer, const ProbeConfig& config,
                                     ProbeHistory* history = nullptr);

// (accuracy, macro-F1 or MCC), or (-RMSE, -RMSE) for regression.
LayerScore evaluate_layer(const ProbeClassifier& classifier, const ProbeDataset& data, std::size_t layer,
                          SecondMetric metric2 = SecondMetric::MacroF1);

// Per-row predictions of `classifier` on one layer.
std::vector<std::size_t> predict_classes(const ProbeClassifier& classifier, const Tensor& representations,
                                         std::size_t layer);

struct ProbeSplit {
    ProbeDataset train;
    ProbeDataset validation;
};

// Holds out `fraction` of the rows, stratified by label for classification.
ProbeSplit split_probe_dataset(const ProbeDataset& data, double fraction, std::uint64_t seed);

struct ProbeRun {
    LayerMetricsTable table;
    ProbeClassifier classifier;             // shared head, or the best layer's head in independent mode
    std::vector<ProbeClassifier> per_layer; // independent mode only
    ProbeHistory history;
};

// Splits, trains and scores every layer on the held-out part.
ProbeRun run_probe(const ProbeDataset& data, const ProbeConfig& config, std::size_t threads = 1);

LayerMetricsTable probe_all_layers(const LayeredModel& model, const LabeledSet& data, Readout readout,
                                   const ProbeConfig& config, std::size_t threads = 1);

} // namespace laet
