#pragma once

#include "laet/model.hpp"
#include "laet/probe.hpp"
#include "laet/selection.hpp"
#include "laet/task.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace laet {

struct FinetuneConfig {
    std::size_t epochs = 50;
    double model_lr = 2e-5;
    double classifier_lr = 2e-4;
    double weight_decay = 1e-4; // model parameters only
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
    double schedule_t0 = 0.0; // > 0 enables lr / (1 + epoch / t0)
    double clip_norm = 1.0;   // global norm over model and head gradients; <= 0 disables
    Readout readout = Readout::LastToken;

    void validate() const;
};

struct EpochRecord {
    double loss = 0.0;                // mean combined loss over the epoch
    std::vector<double> layer_losses; // mean L_l per selected layer, in selection order
    double grad_norm = 0.0;           // mean pre-clip global norm over steps
    double seconds = 0.0;
};

struct TrainingTrace {
    std::vector<std::size_t> layers;
    std::vector<EpochRecord> epochs;
};

// Arithmetic mean. Throws ContractViolation on an empty list.
double combined_loss(std::span<const double> per_layer_losses);

// Makes exactly the selected layers trainable, then minimizes the mean over B
// of the per-layer task losses with minibatch SGD. Only the selected blocks and
// the head are updated. Throws ContractViolation if B is empty and
// NumericDivergence on a non-finite loss.
TrainingTrace finetune(LayeredModel& model, ProbeClassifier& classifier, const SelectionResult& selection,
                       const LabeledSet& data, const FinetuneConfig& config, std::size_t threads = 1);

// Combined loss of one example: forward to max(B), read out each selected
// layer and average their task losses. Exposed for gradient checks.
Var example_loss(Graph& g, LayeredModel& model, ProbeClassifier& classifier, std::span<const std::size_t> layers,
                 const LabeledExample& example, TaskKind task, Readout readout,
                 std::vector<double>* layer_losses = nullptr);

} // namespace laet
