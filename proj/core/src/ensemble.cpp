#include "laet/ensemble.hpp"

#include "laet/error.hpp"
#include "laet/numerics.hpp"
#include "laet/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace laet {

VoteResult majority_vote(std::span<const LayerVote> votes) {
    if (votes.empty()) {
        throw ContractViolation("majority vote over no votes");
    }
    std::size_t k = 0;
    for (const auto& v : votes) {
        k = std::max({k, v.predicted + 1, v.probabilities.size()});
    }
    std::vector<std::size_t> counts(k, 0);
    std::vector<std::vector<double>> shares(k);
    for (const auto& v : votes) {
        ++counts[v.predicted];
        for (std::size_t c = 0; c < v.probabilities.size(); ++c) {
            shares[c].push_back(v.probabilities[c]);
        }
    }
    // Summing in sorted order makes the tie-break independent of vote order.
    std::vector<double> mass(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        std::ranges::sort(shares[c]);
        for (double p : shares[c]) {
            mass[c] += p;
        }
    }
    const std::size_t top = *std::ranges::max_element(counts);
    VoteResult result;
    result.tie = std::ranges::count(counts, top) > 1;
    bool found = false;
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] != top) {
            continue;
        }
        if (!found || mass[c] > mass[result.predicted]) {
            result.predicted = c;
            found = true;
        }
    }
    return result;
}

double average_output(std::span<const LayerVote> votes) {
    if (votes.empty()) {
        throw ContractViolation("average over no votes");
    }
    double sum = 0.0;
    for (const auto& v : votes) {
        sum += v.output;
    }
    return sum / static_cast<double>(votes.size());
}

double ensemble_error_bound(double avg_error, std::size_t ensemble_size) {
    if (!(avg_error >= 0.0 && avg_error < 0.5)) {
        throw InvalidArgument("ensemble bound needs an average error in [0, 0.5)");
    }
    if (ensemble_size == 0) {
        throw InvalidArgument("ensemble bound needs at least one member");
    }
    const double margin = 0.5 - avg_error;
    return std::exp(-2.0 * static_cast<double>(ensemble_size) * margin * margin);
}

LaetPredictor::LaetPredictor(const LayeredModel& model, const ProbeClassifier& classifier,
                             std::vector<std::size_t> selected, Readout readout)
    : model_(&model), classifier_(&classifier), selected_(std::move(selected)), readout_(readout) {
    if (selected_.empty()) {
        throw InvalidArgument("predictor needs at least one selected layer");
    }
    std::ranges::sort(selected_);
    for (std::size_t l : selected_) {
        if (l == 0 || l > model.num_layers()) {
            throw InvalidArgument("selected layer " + std::to_string(l) + " out of range");
        }
    }
}

LayerVote LaetPredictor::vote_from(const LayerRepresentations& reps, std::size_t layer) const {
    const auto r = extract_representation(reps, layer, readout_);
    const Tensor out = classifier_->outputs(Tensor(Shape{1, r.size()}, r), layer);
    LayerVote vote;
    vote.layer = layer;
    if (classifier_->task() == TaskKind::Regression) {
        vote.output = out[0];
        return vote;
    }
    vote.probabilities = numerics::softmax(out.data());
    vote.predicted = numerics::argmax(out.data());
    return vote;
}

LayerVote LaetPredictor::predict_layer(std::string_view prompt, std::size_t layer) const {
    if (!std::ranges::binary_search(selected_, layer)) {
        throw InvalidArgument("layer " + std::to_string(layer) + " is not part of the trained selection");
    }
    Graph g;
    const auto tokens = model_->tokenize(prompt);
    const auto states = model_->forward(g, tokens, layer);
    LayerRepresentations reps;
    for (Var v : states) {
        reps.states.push_back(g.value(v));
    }
    return vote_from(reps, layer);
}

EnsemblePrediction LaetPredictor::predict(std::string_view prompt) const {
    Graph g;
    const auto tokens = model_->tokenize(prompt);
    const auto states = model_->forward(g, tokens, selected_.back());
    LayerRepresentations reps;
    for (Var v : states) {
        reps.states.push_back(g.value(v));
    }
    EnsemblePrediction out;
    for (std::size_t l : selected_) {
        out.votes.push_back(vote_from(reps, l));
    }
    if (classifier_->task() == TaskKind::Regression) {
        out.output = average_output(out.votes);
    } else {
        const VoteResult v = majority_vote(out.votes);
        out.predicted = v.predicted;
        out.tie = v.tie;
    }
    return out;
}

std::vector<EnsemblePrediction> LaetPredictor::predict_all(const LabeledSet& data, std::size_t threads) const {
    std::vector<EnsemblePrediction> out(data.size());
    parallel_for(data.size(), threads, [&](std::size_t i) { out[i] = predict(data.examples[i].prompt); });
    return out;
}

} // namespace laet
