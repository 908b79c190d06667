#include "laet/model.hpp"

#include "laet/error.hpp"
#include "laet/ops.hpp"
#include "laet/random.hpp"

#include <cmath>
#include <type_traits>

namespace laet {

void ModelConfig::validate() const {
    if (layers == 0 || dim == 0 || heads == 0 || max_context == 0 || vocab_size == 0) {
        throw InvalidArgument("model extents must be positive");
    }
    if (dim % heads != 0) {
        throw InvalidArgument("heads (" + std::to_string(heads) + ") must divide dim (" + std::to_string(dim) + ")");
    }
}

std::string_view to_string(Readout r) {
    switch (r) {
    case Readout::LastToken:
        return "lt";
    case Readout::Sum:
        return "sat";
    case Readout::Average:
        return "avt";
    }
    return "lt";
}

Readout parse_readout(std::string_view name) {
    if (name == "lt") {
        return Readout::LastToken;
    }
    if (name == "sat") {
        return Readout::Sum;
    }
    if (name == "avt") {
        return Readout::Average;
    }
    throw InvalidArgument("unknown readout strategy '" + std::string(name) + "' (expected lt, sat or avt)");
}

const Tensor& LayerRepresentations::layer(std::size_t l) const {
    if (l == 0 || l >= states.size()) {
        throw InvalidArgument("layer " + std::to_string(l) + " out of range 1.." + std::to_string(num_layers()));
    }
    return states[l];
}

std::vector<double> extract_representation(const LayerRepresentations& reps, std::size_t layer, Readout readout) {
    const Tensor& h = reps.layer(layer);
    const std::size_t n = h.rows();
    const std::size_t d = h.cols();
    if (readout == Readout::LastToken) {
        const auto last = h.row(n - 1);
        return {last.begin(), last.end()};
    }
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            out[j] += h.at(i, j);
        }
    }
    if (readout == Readout::Average) {
        for (double& v : out) {
            v /= static_cast<double>(n);
        }
    }
    return out;
}

Var readout_node(Graph& g, Var hidden, Readout readout) {
    switch (readout) {
    case Readout::LastToken:
        return ops::select_row(g, hidden, g.value(hidden).rows() - 1);
    case Readout::Sum:
        return ops::sum_rows(g, hidden);
    case Readout::Average:
        return ops::mean_rows(g, hidden);
    }
    throw ContractViolation("unhandled readout");
}

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) {
        v = rng.uniform(-bound, bound);
    }
    return t;
}

Tensor filled(std::size_t n, double value) {
    Tensor t(Shape{n});
    for (double& v : t.data()) {
        v = value;
    }
    return t;
}

} // namespace

LayeredModel::LayeredModel(ModelConfig config, std::uint64_t seed) : config_(config) {
    if (config_.ff_dim == 0) {
        config_.ff_dim = 4 * config_.dim;
    }
    config_.validate();
    const std::size_t d = config_.dim;
    const std::size_t f = config_.ff_dim;
    Rng rng(seed);
    embedding_ = uniform_tensor({config_.vocab_size, d}, 1.0, rng);
    positional_ = uniform_tensor({config_.max_context, d}, 0.1, rng);
    const double w_bound = 1.0 / std::sqrt(static_cast<double>(d));
    const double ff_bound = 1.0 / std::sqrt(static_cast<double>(f));
    blocks_.reserve(config_.layers);
    for (std::size_t l = 0; l < config_.layers; ++l) {
        BlockParams b;
        b.ln1_gain = filled(d, 1.0);
        b.ln1_bias = filled(d, 0.0);
        b.wq = uniform_tensor({d, d}, w_bound, rng);
        b.wk = uniform_tensor({d, d}, w_bound, rng);
        b.wv = uniform_tensor({d, d}, w_bound, rng);
        b.wo = uniform_tensor({d, d}, w_bound, rng);
        b.ln2_gain = filled(d, 1.0);
        b.ln2_bias = filled(d, 0.0);
        b.ff_in = uniform_tensor({d, f}, w_bound, rng);
        b.ff_in_bias = filled(f, 0.0);
        b.ff_out = uniform_tensor({f, d}, ff_bound, rng);
        b.ff_out_bias = filled(d, 0.0);
        blocks_.push_back(std::move(b));
    }
    trainable_.assign(config_.layers, false);
}

std::vector<std::size_t> LayeredModel::tokenize(std::string_view text) const {
    return tokenizer_.tokenize(text, config_.max_context);
}

Tensor LayeredModel::embed(std::span<const std::size_t> tokens) const {
    Graph g;
    auto nodes = forward(g, tokens, 0);
    return g.value(nodes.front());
}

LayerRepresentations LayeredModel::forward_all_layers(std::span<const std::size_t> tokens) const {
    Graph g;
    const auto nodes = forward(g, tokens, config_.layers);
    LayerRepresentations reps;
    reps.states.reserve(nodes.size());
    for (Var v : nodes) {
        reps.states.push_back(g.value(v));
    }
    return reps;
}

template <typename Self>
std::vector<Var> LayeredModel::forward_impl(Self& self, Graph& g, std::span<const std::size_t> tokens, std::size_t upto) {
    const ModelConfig& cfg = self.config_;
    if (tokens.empty()) {
        throw InvalidArgument("token sequence must not be empty");
    }
    if (tokens.size() > cfg.max_context) {
        throw InvalidArgument("sequence of " + std::to_string(tokens.size()) + " tokens exceeds max_context " +
                              std::to_string(cfg.max_context));
    }
    if (upto > cfg.layers) {
        throw InvalidArgument("layer " + std::to_string(upto) + " out of range");
    }
    auto bind = [&g](auto& t) {
        if constexpr (std::is_const_v<std::remove_reference_t<decltype(t)>>) {
            return g.constant_ref(t);
        } else {
            return g.param(t);
        }
    };

    std::vector<Var> states;
    states.reserve(upto + 1);
    const Var tok = ops::embedding(g, bind(self.embedding_), tokens);
    const Var pos = ops::leading_rows(g, bind(self.positional_), tokens.size());
    Var x = ops::add(g, tok, pos);
    states.push_back(x);

    for (std::size_t l = 0; l < upto; ++l) {
        auto& b = self.blocks_[l];
        const Var a = ops::layer_norm(g, x, bind(b.ln1_gain), bind(b.ln1_bias));
        const Var q = ops::matmul(g, a, bind(b.wq));
        const Var k = ops::matmul(g, a, bind(b.wk));
        const Var v = ops::matmul(g, a, bind(b.wv));
        const Var att = ops::causal_attention(g, q, k, v, cfg.heads);
        const Var h = ops::add(g, x, ops::matmul(g, att, bind(b.wo)));
        const Var c = ops::layer_norm(g, h, bind(b.ln2_gain), bind(b.ln2_bias));
        const Var inner = ops::gelu(g, ops::linear(g, c, bind(b.ff_in), bind(b.ff_in_bias)));
        x = ops::add(g, h, ops::linear(g, inner, bind(b.ff_out), bind(b.ff_out_bias)));
        states.push_back(x);
    }
    return states;
}

std::vector<Var> LayeredModel::forward(Graph& g, std::span<const std::size_t> tokens, std::size_t upto) {
    return forward_impl(*this, g, tokens, upto);
}

std::vector<Var> LayeredModel::forward(Graph& g, std::span<const std::size_t> tokens, std::size_t upto) const {
    return forward_impl(*this, g, tokens, upto);
}

void LayeredModel::check_layer(std::size_t l) const {
    if (l == 0 || l > config_.layers) {
        throw InvalidArgument("layer " + std::to_string(l) + " out of range 1.." + std::to_string(config_.layers));
    }
}

void LayeredModel::set_trainable(std::span<const std::size_t> layers) {
    for (std::size_t l : layers) {
        check_layer(l);
    }
    trainable_.assign(config_.layers, false);
    for (std::size_t l : layers) {
        trainable_[l - 1] = true;
    }
    for (std::size_t l = 0; l < config_.layers; ++l) {
        BlockParams::visit(blocks_[l], [on = trainable_[l]](const char*, Tensor& t) { t.set_requires_grad(on); });
    }
    embedding_.set_requires_grad(false);
    positional_.set_requires_grad(false);
}

BlockParams& LayeredModel::block(std::size_t l) {
    check_layer(l);
    return blocks_[l - 1];
}

const BlockParams& LayeredModel::block(std::size_t l) const {
    check_layer(l);
    return blocks_[l - 1];
}

void LayeredModel::for_each_parameter(const std::function<void(const std::string&, const Tensor&)>& fn) const {
    fn("embedding", embedding_);
    fn("positional", positional_);
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const std::string prefix = "layers." + std::to_string(l + 1) + ".";
        BlockParams::visit(blocks_[l], [&](const char* name, const Tensor& t) { fn(prefix + name, t); });
    }
}

void LayeredModel::for_each_parameter(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("embedding", embedding_);
    fn("positional", positional_);
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const std::string prefix = "layers." + std::to_string(l + 1) + ".";
        BlockParams::visit(blocks_[l], [&](const char* name, Tensor& t) { fn(prefix + name, t); });
    }
}

std::size_t LayeredModel::block_parameter_count() const {
    std::size_t total = 0;
    BlockParams::visit(blocks_.front(), [&](const char*, const Tensor& t) { total += t.size(); });
    return total;
}

std::size_t LayeredModel::parameter_count() const {
    std::size_t total = 0;
    for_each_parameter([&](const std::string&, const Tensor& t) { total += t.size(); });
    return total;
}

std::string LayeredModel::block_bytes(std::size_t l) const {
    std::string out;
    BlockParams::visit(block(l), [&](const char*, const Tensor& t) {
        const auto bytes = std::as_bytes(t.data());
        out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    });
    return out;
}

void LayeredModel::clear_grads() {
    for_each_parameter([](const std::string&, Tensor& t) { t.clear_grad(); });
}

} // namespace laet
