#include "laet/finetune.hpp"

#include "laet/error.hpp"
#include "laet/log.hpp"
#include "laet/ops.hpp"
#include "laet/optim.hpp"
#include "laet/parallel.hpp"
#include "laet/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>

namespace laet {

namespace {

constexpr std::uint64_t kShuffleSalt = 0x4654;

} // namespace

void FinetuneConfig::validate() const {
    if (epochs == 0) {
        throw InvalidArgument("finetune epochs must be at least 1");
    }
    if (!(model_lr > 0.0) || !(classifier_lr > 0.0) || !std::isfinite(model_lr) || !std::isfinite(classifier_lr)) {
        throw InvalidArgument("finetune learning rates must be positive");
    }
    if (!(weight_decay >= 0.0)) {
        throw InvalidArgument("weight decay must be non-negative");
    }
    if (batch_size == 0) {
        throw InvalidArgument("finetune batch size must be positive");
    }
}

double combined_loss(std::span<const double> per_layer_losses) {
    if (per_layer_losses.empty()) {
        throw ContractViolation("combined loss over an empty layer set");
    }
    return std::accumulate(per_layer_losses.begin(), per_layer_losses.end(), 0.0) /
           static_cast<double>(per_layer_losses.size());
}

Var example_loss(Graph& g, LayeredModel& model, ProbeClassifier& classifier, std::span<const std::size_t> layers,
                 const LabeledExample& example, TaskKind task, Readout readout, std::vector<double>* layer_losses) {
    if (layers.empty()) {
        throw ContractViolation("combined loss over an empty layer set");
    }
    const auto tokens = model.tokenize(example.prompt);
    const std::size_t top = *std::ranges::max_element(layers);
    const auto states = model.forward(g, tokens, top);
    const std::size_t label[] = {example.label};
    const double target[] = {example.target};
    std::vector<Var> losses;
    losses.reserve(layers.size());
    for (std::size_t l : layers) {
        const Var r = readout_node(g, states[l], readout);
        const Var out = classifier.forward(g, r, l);
        if (!g.value(out).all_finite()) {
            throw NumericError("head outputs are not finite");
        }
        losses.push_back(task_loss(g, out, task, label, target));
        if (layer_losses != nullptr) {
            layer_losses->push_back(g.value(losses.back())[0]);
        }
    }
    return ops::mean_of(g, losses);
}

TrainingTrace finetune(LayeredModel& model, ProbeClassifier& classifier, const SelectionResult& selection,
                       const LabeledSet& data, const FinetuneConfig& config, std::size_t threads) {
    if (selection.selected.empty()) {
        throw ContractViolation("finetune requires a non-empty layer selection");
    }
    config.validate();
    if (data.empty()) {
        throw InvalidArgument("cannot finetune on an empty dataset");
    }
    model.set_trainable(selection.selected);
    classifier.set_trainable(true);
    model.clear_grads();
    classifier.clear_grads();

    std::vector<Tensor*> model_params;
    model.for_each_parameter([&](const std::string&, Tensor& t) { model_params.push_back(&t); });
    std::vector<Tensor*> head_params = classifier.parameters();
    std::vector<Tensor*> all_params = model_params;
    all_params.insert(all_params.end(), head_params.begin(), head_params.end());

    const std::span<const std::size_t> layers = selection.selected;
    const std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, kShuffleSalt));

    TrainingTrace trace;
    trace.layers = selection.selected;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const double model_lr = scheduled_rate(config.model_lr, epoch, config.schedule_t0);
        const double head_lr = scheduled_rate(config.classifier_lr, epoch, config.schedule_t0);
        rng.shuffle(std::span(order));

        EpochRecord record;
        record.layer_losses.assign(layers.size(), 0.0);
        double loss_sum = 0.0;
        double norm_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0, batch = 0; start < n; start += config.batch_size, ++batch) {
            const std::size_t m = std::min(config.batch_size, n - start);
            std::vector<std::optional<Graph>> graphs(m);
            std::vector<Var> losses(m);
            std::vector<std::vector<double>> per_layer(m);
            try {
                parallel_for(m, threads, [&](std::size_t i) {
                    graphs[i].emplace();
                    losses[i] = example_loss(*graphs[i], model, classifier, layers,
                                             data.examples[order[start + i]], data.task, config.readout,
                                             &per_layer[i]);
                    graphs[i]->propagate(losses[i]);
                });
            } catch (const NumericError& e) {
                throw NumericDivergence(epoch, batch, e.what());
            }
            double batch_loss = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                batch_loss += graphs[i]->value(losses[i])[0];
            }
            batch_loss /= static_cast<double>(m);
            if (!std::isfinite(batch_loss)) {
                throw NumericDivergence(epoch, batch, "finetune loss is not finite");
            }
            // Serial flush in example order keeps the accumulated gradients bitwise reproducible.
            for (std::size_t i = 0; i < m; ++i) {
                graphs[i]->flush(1.0 / static_cast<double>(m));
                for (std::size_t j = 0; j < layers.size(); ++j) {
                    record.layer_losses[j] += per_layer[i][j];
                }
            }
            graphs.clear();
            const double norm = global_grad_norm(all_params);
            const double clip = clip_factor(norm, config.clip_norm);
            sgd_step(model_params, model_lr, config.weight_decay, clip);
            sgd_step(head_params, head_lr, 0.0, clip);
            loss_sum += batch_loss * static_cast<double>(m);
            norm_sum += norm;
            ++steps;
        }
        record.loss = loss_sum / static_cast<double>(n);
        for (double& v : record.layer_losses) {
            v /= static_cast<double>(n);
        }
        record.grad_norm = norm_sum / static_cast<double>(steps);
        record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        log::info("finetune epoch {}/{} loss {:.6f} grad norm {:.4f} ({:.1f}s)", epoch + 1, config.epochs,
                  record.loss, record.grad_norm, record.seconds);
        trace.epochs.push_back(std::move(record));
    }
    return trace;
}

} // namespace laet
