#include "laet/probe.hpp"

#include "laet/dataset.hpp"
#include "laet/error.hpp"
#include "laet/log.hpp"
#include "laet/metrics.hpp"
#include "laet/numerics.hpp"
#include "laet/ops.hpp"
#include "laet/optim.hpp"
#include "laet/parallel.hpp"
#include "laet/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace laet {

namespace {

constexpr std::uint64_t kShuffleSalt = 0x5348;
constexpr std::uint64_t kSplitSalt = 0x5350;

Tensor uniform_weights(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Tensor t(Shape{fan_in, fan_out});
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.data()) {
        v = rng.uniform(-bound, bound);
    }
    return t;
}

} // namespace

ProbeClassifier::ProbeClassifier(std::size_t input_dim, TaskKind task, std::size_t output_dim, std::uint64_t seed)
    : task_(task), input_dim_(input_dim), output_dim_(output_dim) {
    if (input_dim == 0 || output_dim == 0) {
        throw InvalidArgument("probe dimensions must be positive");
    }
    if (task == TaskKind::Regression && output_dim != 1) {
        throw InvalidArgument("regression head has exactly one output");
    }
    if (task == TaskKind::Classification && output_dim < 2) {
        throw InvalidArgument("classification head needs at least two classes");
    }
    Rng rng(seed);
    w1_ = uniform_weights(input_dim, kHidden1, rng);
    b1_ = Tensor(Shape{kHidden1});
    w2_ = uniform_weights(kHidden1, kHidden2, rng);
    b2_ = Tensor(Shape{kHidden2});
    w3_ = uniform_weights(kHidden2, output_dim, rng);
    b3_ = Tensor(Shape{output_dim});
    set_trainable(true);
}

void ProbeClassifier::fit_input_scaler(const ProbeDataset& data) {
    const std::size_t num_layers = data.num_layers();
    const std::size_t d = input_dim_;
    const std::size_t n = data.size();
    if (data.dim() != d || n == 0) {
        throw InvalidArgument("scaler data does not match the probe input width");
    }
    Tensor mean(Shape{num_layers, d});
    Tensor inv_std(Shape{num_layers, d});
    for (std::size_t l = 0; l < num_layers; ++l) {
        const Tensor& reps = data.layers[l];
        for (std::size_t j = 0; j < d; ++j) {
            double m = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                m += reps.at(i, j);
            }
            m /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double dev = reps.at(i, j) - m;
                var += dev * dev;
            }
            const double sd = std::sqrt(var / static_cast<double>(n));
            mean.at(l, j) = m;
            inv_std.at(l, j) = sd > 1e-8 ? 1.0 / sd : 1.0;
        }
    }
    set_input_scaler(std::move(mean), std::move(inv_std));
}

void ProbeClassifier::set_input_scaler(Tensor mean, Tensor inv_std) {
    if (mean.shape() != inv_std.shape() || (!mean.empty() && (mean.rank() != 2 || mean.cols() != input_dim_))) {
        throw InvalidArgument("scaler statistics must both be [layers x " + std::to_string(input_dim_) + "]");
    }
    input_mean_ = std::move(mean);
    input_inv_std_ = std::move(inv_std);
}

template <typename Self>
Var ProbeClassifier::forward_impl(Self& self, Graph& g, Var x, std::size_t layer) {
    if (g.value(x).cols() != self.input_dim_) {
        throw InvalidArgument("probe expects " + std::to_string(self.input_dim_) + "-dimensional inputs, got " +
                              std::to_string(g.value(x).cols()));
    }
    if (self.has_input_scaler()) {
        if (layer == 0 || layer > self.input_mean_.rows()) {
            throw InvalidArgument("probe has no input statistics for layer " + std::to_string(layer));
        }
        x = ops::standardize(g, x, self.input_mean_.row(layer - 1), self.input_inv_std_.row(layer - 1));
    }
    auto bind = [&g](auto& t) {
        if constexpr (std::is_const_v<std::remove_reference_t<decltype(t)>>) {
            return g.constant_ref(t);
        } else {
            return g.param(t);
        }
    };
    Var h = ops::relu(g, ops::linear(g, x, bind(self.w1_), bind(self.b1_)));
    h = ops::relu(g, ops::linear(g, h, bind(self.w2_), bind(self.b2_)));
    return ops::linear(g, h, bind(self.w3_), bind(self.b3_));
}

Var ProbeClassifier::forward(Graph& g, Var x, std::size_t layer) { return forward_impl(*this, g, x, layer); }

Var ProbeClassifier::forward(Graph& g, Var x, std::size_t layer) const { return forward_impl(*this, g, x, layer); }

Tensor ProbeClassifier::outputs(const Tensor& x, std::size_t layer) const {
    Graph g;
    return g.value(forward(g, g.constant_ref(x), layer));
}

void ProbeClassifier::for_each_parameter(const std::function<void(const std::string&, const Tensor&)>& fn) const {
    fn("w1", w1_);
    fn("b1", b1_);
    fn("w2", w2_);
    fn("b2", b2_);
    fn("w3", w3_);
    fn("b3", b3_);
}

void ProbeClassifier::for_each_parameter(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("w1", w1_);
    fn("b1", b1_);
    fn("w2", w2_);
    fn("b2", b2_);
    fn("w3", w3_);
    fn("b3", b3_);
}

std::vector<Tensor*> ProbeClassifier::parameters() { return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}; }

std::size_t ProbeClassifier::parameter_count() const {
    std::size_t total = 0;
    for_each_parameter([&](const std::string&, const Tensor& t) { total += t.size(); });
    return total;
}

void ProbeClassifier::set_trainable(bool on) {
    for (Tensor* t : parameters()) {
        t->set_requires_grad(on);
    }
}

void ProbeClassifier::clear_grads() {
    for (Tensor* t : parameters()) {
        t->clear_grad();
    }
}

bool ProbeClassifier::bitwise_equal(const ProbeClassifier& other) const {
    return task_ == other.task_ && input_dim_ == other.input_dim_ && output_dim_ == other.output_dim_ &&
           w1_.bitwise_equal(other.w1_) && b1_.bitwise_equal(other.b1_) && w2_.bitwise_equal(other.w2_) &&
           b2_.bitwise_equal(other.b2_) && w3_.bitwise_equal(other.w3_) && b3_.bitwise_equal(other.b3_) &&
           input_mean_.bitwise_equal(other.input_mean_) && input_inv_std_.bitwise_equal(other.input_inv_std_);
}

Var task_loss(Graph& g, Var outputs, TaskKind task, std::span<const std::size_t> labels,
              std::span<const double> targets) {
    if (task == TaskKind::Classification) {
        return ops::softmax_cross_entropy(g, outputs, labels);
    }
    return ops::mse(g, outputs, targets);
}

const Tensor& ProbeDataset::layer(std::size_t l) const {
    if (l == 0 || l > layers.size()) {
        throw InvalidArgument("layer " + std::to_string(l) + " out of range 1.." + std::to_string(layers.size()));
    }
    return layers[l - 1];
}

ProbeDataset ProbeDataset::subset(std::span<const std::size_t> indices) const {
    ProbeDataset out;
    out.task = task;
    out.num_classes = num_classes;
    out.layers.reserve(layers.size());
    for (const Tensor& src : layers) {
        const std::size_t d = src.cols();
        Tensor dst(Shape{indices.size(), d});
        for (std::size_t i = 0; i < indices.size(); ++i) {
            std::ranges::copy(src.row(indices[i]), dst.row(i).begin());
        }
        out.layers.push_back(std::move(dst));
    }
    for (std::size_t i : indices) {
        if (task == TaskKind::Classification) {
            out.labels.push_back(labels[i]);
        } else {
            out.targets.push_back(targets[i]);
        }
    }
    return out;
}

ProbeDataset extract_probe_dataset(const LayeredModel& model, const LabeledSet& data, Readout readout,
                                   std::size_t threads) {
    if (data.empty()) {
        throw InvalidArgument("cannot probe an empty dataset");
    }
    const std::size_t n = data.size();
    const std::size_t num_layers = model.num_layers();
    const std::size_t d = model.config().dim;
    ProbeDataset out;
    out.task = data.task;
    out.num_classes = data.num_classes;
    out.layers.assign(num_layers, Tensor(Shape{n, d}));
    parallel_for(n, threads, [&](std::size_t i) {
        const auto tokens = model.tokenize(data.examples[i].prompt);
        const LayerRepresentations reps = model.forward_all_layers(tokens);
        for (std::size_t l = 1; l <= num_layers; ++l) {
            const auto r = extract_representation(reps, l, readout);
            std::ranges::copy(r, out.layers[l - 1].row(i).begin());
        }
    });
    for (const auto& ex : data.examples) {
        if (data.task == TaskKind::Classification) {
            out.labels.push_back(ex.label);
        } else {
            out.targets.push_back(ex.target);
        }
    }
    return out;
}

std::string_view to_string(ProbeMode m) { return m == ProbeMode::Shared ? "shared" : "independent"; }

ProbeMode parse_probe_mode(std::string_view name) {
    if (name == "shared") {
        return ProbeMode::Shared;
    }
    if (name == "independent") {
        return ProbeMode::Independent;
    }
    throw InvalidArgument("unknown probe mode '" + std::string(name) + "' (expected shared or independent)");
}

std::string_view to_string(SecondMetric m) { return m == SecondMetric::MacroF1 ? "f1" : "mcc"; }

SecondMetric parse_second_metric(std::string_view name) {
    if (name == "f1") {
        return SecondMetric::MacroF1;
    }
    if (name == "mcc") {
        return SecondMetric::Mcc;
    }
    throw InvalidArgument("unknown metric '" + std::string(name) + "' (expected f1 or mcc)");
}

void ProbeConfig::validate() const {
    if (epochs == 0) {
        throw InvalidArgument("probe epochs must be at least 1");
    }
    if (!(lr > 0.0) || !std::isfinite(lr)) {
        throw InvalidArgument("probe learning rate must be positive");
    }
    if (batch_size == 0) {
        throw InvalidArgument("probe batch size must be positive");
    }
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw InvalidArgument("probe validation fraction must lie in (0, 1)");
    }
}

namespace {

void check_trainable(const ProbeDataset& data) {
    if (data.size() == 0 || data.layers.empty()) {
        throw InvalidArgument("cannot train a probe on an empty dataset");
    }
}

// Loss of `clf` on all rows of one layer, without recording gradients.
double full_loss(const ProbeClassifier& clf, const ProbeDataset& data, std::size_t layer) {
    Graph g;
    const Var out = clf.forward(g, g.constant_ref(data.layer(layer)), layer);
    return g.value(task_loss(g, out, data.task, data.labels, data.targets))[0];
}

class ProbeTrainer {
public:
    ProbeTrainer(const ProbeDataset& data, const ProbeConfig& config, ProbeClassifier& clf)
        : data_(data), config_(config), clf_(clf), params_(clf.parameters()),
          rng_(derive_seed(config.seed, kShuffleSalt)) {}

    // One pass over the rows of `layer`. Returns the mean minibatch loss.
    double pass(std::size_t layer, std::size_t epoch, double lr, std::size_t& batch_counter, double& norm_sum) {
        const std::size_t n = data_.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng_.shuffle(std::span(order));
        const Tensor& reps = data_.layer(layer);
        const std::size_t d = reps.cols();
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += config_.batch_size) {
            const std::size_t m = std::min(config_.batch_size, n - start);
            Tensor x(Shape{m, d});
            std::vector<std::size_t> labels;
            std::vector<double> targets;
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t row = order[start + i];
                std::ranges::copy(reps.row(row), x.row(i).begin());
                if (data_.task == TaskKind::Classification) {
                    labels.push_back(data_.labels[row]);
                } else {
                    targets.push_back(data_.targets[row]);
                }
            }
            Graph g;
            const Var out = clf_.forward(g, g.constant(std::move(x)), layer);
            if (!g.value(out).all_finite()) {
                throw NumericDivergence(epoch, batch_counter, "probe outputs are not finite");
            }
            const Var loss = task_loss(g, out, data_.task, labels, targets);
            const double value = g.value(loss)[0];
            if (!std::isfinite(value)) {
                throw NumericDivergence(epoch, batch_counter, "probe loss is not finite");
            }
            g.backward(loss);
            const double norm = global_grad_norm(params_);
            sgd_step(params_, lr, 0.0, clip_factor(norm, config_.clip_norm));
            norm_sum += norm;
            loss_sum += value;
            ++batches;
            ++batch_counter;
        }
        return loss_sum / static_cast<double>(batches);
    }

private:
    const ProbeDataset& data_;
    const ProbeConfig& config_;
    ProbeClassifier& clf_;
    std::vector<Tensor*> params_;
    Rng rng_;
};

ProbeClassifier train_on_layers(const ProbeDataset& data, std::span<const std::size_t> layers,
                                const ProbeConfig& config, ProbeHistory* history) {
    config.validate();
    check_trainable(data);
    ProbeClassifier clf(data.dim(), data.task, data.output_dim(), config.seed);
    clf.fit_input_scaler(data);
    ProbeHistory local;
    for (std::size_t l : layers) {
        local.initial_loss.push_back(full_loss(clf, data, l));
    }
    ProbeTrainer trainer(data, config, clf);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = scheduled_rate(config.lr, epoch, config.schedule_t0);
        std::size_t batch_counter = 0;
        double norm_sum = 0.0;
        std::vector<double> losses;
        for (std::size_t l : layers) {
            losses.push_back(trainer.pass(l, epoch, lr, batch_counter, norm_sum));
        }
        local.epoch_loss.push_back(std::move(losses));
        local.grad_norm.push_back(norm_sum / static_cast<double>(batch_counter));
        log::debug("probe epoch {} mean grad norm {:.6f}", epoch + 1, local.grad_norm.back());
    }
    if (history != nullptr) {
        *history = std::move(local);
    }
    return clf;
}

} // namespace

ProbeClassifier train_probe(const ProbeDataset& data, const ProbeConfig& config, ProbeHistory* history) {
    std::vector<std::size_t> layers(data.num_layers());
    std::iota(layers.begin(), layers.end(), std::size_t{1});
    return train_on_layers(data, layers, config, history);
}

ProbeClassifier train_probe_on_layer(const ProbeDataset& data, std::size_t layer, const ProbeConfig& config,
                                     ProbeHistory* history) {
    (void)data.layer(layer);
    const std::size_t layers[] = {layer};
    return train_on_layers(data, layers, config, history);
}

std::vector<std::size_t> predict_classes(const ProbeClassifier& classifier, const Tensor& representations,
                                         std::size_t layer) {
    const Tensor logits = classifier.outputs(representations, layer);
    std::vector<std::size_t> preds(logits.rows());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        preds[i] = numerics::argmax(logits.row(i));
    }
    return preds;
}

LayerScore evaluate_layer(const ProbeClassifier& classifier, const ProbeDataset& data, std::size_t layer,
                          SecondMetric metric2) {
    const Tensor& reps = data.layer(layer);
    if (data.size() == 0) {
        throw InvalidArgument("cannot evaluate on an empty dataset");
    }
    if (data.task == TaskKind::Regression) {
        const Tensor out = classifier.outputs(reps, layer);
        const double r = metrics::rmse(out.data(), data.targets);
        return {-r, -r};
    }
    const auto preds = predict_classes(classifier, reps, layer);
    LayerScore s;
    s.m1 = metrics::accuracy(preds, data.labels);
    s.m2 = metric2 == SecondMetric::MacroF1 ? metrics::f1_scores(preds, data.labels, data.num_classes).macro
                                            : metrics::mcc(preds, data.labels, data.num_classes);
    return s;
}

ProbeSplit split_probe_dataset(const ProbeDataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw InvalidArgument("validation fraction must lie in (0, 1)");
    }
    const std::size_t n = data.size();
    const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (n_val == 0 || n_val >= n) {
        throw InvalidArgument("dataset of " + std::to_string(n) + " rows is too small for a probe validation split");
    }
    const auto order = data.task == TaskKind::Classification ? stratified_order(data.labels, seed)
                                                             : shuffled_order(n, seed);
    std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::ranges::sort(val);
    std::ranges::sort(train);
    return {data.subset(train), data.subset(val)};
}

ProbeRun run_probe(const ProbeDataset& data, const ProbeConfig& config, std::size_t threads) {
    config.validate();
    check_trainable(data);
    const ProbeSplit parts = split_probe_dataset(data, config.validation_fraction, derive_seed(config.seed, kSplitSalt));
    const std::size_t num_layers = data.num_layers();
    ProbeRun run;
    if (data.task == TaskKind::Regression) {
        run.table.m1_name = "neg_rmse";
        run.table.m2_name = "neg_rmse";
    } else {
        run.table.m2_name = config.metric2 == SecondMetric::MacroF1 ? "macro_f1" : "mcc";
    }
    if (config.mode == ProbeMode::Shared) {
        run.classifier = train_probe(parts.train, config, &run.history);
        for (std::size_t l = 1; l <= num_layers; ++l) {
            run.table.rows.push_back(evaluate_layer(run.classifier, parts.validation, l, config.metric2));
        }
        return run;
    }

    run.per_layer.resize(num_layers);
    std::vector<ProbeHistory> histories(num_layers);
    parallel_for(num_layers, threads, [&](std::size_t i) {
        run.per_layer[i] = train_probe_on_layer(parts.train, i + 1, config, &histories[i]);
    });
    run.history.epoch_loss.assign(config.epochs, std::vector<double>(num_layers, 0.0));
    run.history.grad_norm.assign(config.epochs, 0.0);
    for (std::size_t i = 0; i < num_layers; ++i) {
        run.history.initial_loss.push_back(histories[i].initial_loss.front());
        for (std::size_t e = 0; e < config.epochs; ++e) {
            run.history.epoch_loss[e][i] = histories[i].epoch_loss[e].front();
            run.history.grad_norm[e] += histories[i].grad_norm[e] / static_cast<double>(num_layers);
        }
        run.table.rows.push_back(evaluate_layer(run.per_layer[i], parts.validation, i + 1, config.metric2));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < num_layers; ++i) {
        const auto& r = run.table.rows;
        if (r[i].m1 + r[i].m2 > r[best].m1 + r[best].m2) {
            best = i;
        }
    }
    run.classifier = run.per_layer[best];
    return run;
}

LayerMetricsTable probe_all_layers(const LayeredModel& model, const LabeledSet& data, Readout readout,
                                   const ProbeConfig& config, std::size_t threads) {
    return run_probe(extract_probe_dataset(model, data, readout, threads), config, threads).table;
}

} // namespace laet
