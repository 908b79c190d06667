#pragma once

#include "laet/model.hpp"
#include "laet/probe.hpp"

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace laet {

// One selected layer's opinion about an input.
struct LayerVote {
    std::size_t layer = 0;
    std::size_t predicted = 0;          // classification
    std::vector<double> probabilities;  // softmax of the head's logits; empty for regression
    double output = 0.0;                // regression
};

struct VoteResult {
    std::size_t predicted = 0;
    bool tie = false; // the first-round vote count was tied
};

struct EnsemblePrediction {
    std::vector<LayerVote> votes;
    std::size_t predicted = 0;
    bool tie = false;
    double output = 0.0; // mean of the layer outputs for regression
};

// Most votes wins; count ties go to the highest summed probability, then the
// lowest class index. Throws ContractViolation on an empty vote list.
VoteResult majority_vote(std::span<const LayerVote> votes);

// Mean of the scalar outputs. Throws ContractViolation on an empty vote list.
double average_output(std::span<const LayerVote> votes);

// exp(-2 |B| (0.5 - avg_error)^2). Throws InvalidArgument unless
// 0 <= avg_error < 0.5 and ensemble_size >= 1.
double ensemble_error_bound(double avg_error, std::size_t ensemble_size);

// Votes of a fine-tuned model and head over the selected layers.
class LaetPredictor {
public:
    // Throws InvalidArgument if `selected` is empty or out of range.
    LaetPredictor(const LayeredModel& model, const ProbeClassifier& classifier, std::vector<std::size_t> selected,
                  Readout readout);

    [[nodiscard]] const std::vector<std::size_t>& selected() const noexcept { return selected_; }

    // Throws InvalidArgument for a layer outside the selection.
    [[nodiscard]] LayerVote predict_layer(std::string_view prompt, std::size_t layer) const;

    // One forward pass to max(B), then a vote.
    [[nodiscard]] EnsemblePrediction predict(std::string_view prompt) const;

    [[nodiscard]] std::vector<EnsemblePrediction> predict_all(const LabeledSet& data, std::size_t threads = 1) const;

private:
    [[nodiscard]] LayerVote vote_from(const LayerRepresentations& reps, std::size_t layer) const;

    const LayeredModel* model_;
    const ProbeClassifier* classifier_;
    std::vector<std::size_t> selected_;
    Readout readout_;
};

} // namespace laet
