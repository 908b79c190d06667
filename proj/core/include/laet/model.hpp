#pragma once

#include "laet/graph.hpp"
#include "laet/tensor.hpp"
#include "laet/tokenizer.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace laet {

struct ModelConfig {
    std::size_t layers = 8;
    std::size_t dim = 64;
    std::size_t heads = 4;
    std::size_t max_context = 128;
    std::size_t ff_dim = 0; // 0 selects 4 * dim
    std::size_t vocab_size = Tokenizer::kVocabSize;

    // Throws InvalidArgument on non-positive extents or heads not dividing dim.
    void validate() const;
};

// How a layer's n x d hidden-state matrix is reduced to one d-vector.
enum class Readout { LastToken, Sum, Average };

std::string_view to_string(Readout r);
Readout parse_readout(std::string_view name); // "lt" | "sat" | "avt"

// Parameters of one pre-norm transformer block.
struct BlockParams {
    Tensor ln1_gain, ln1_bias;
    Tensor wq, wk, wv, wo;
    Tensor ln2_gain, ln2_bias;
    Tensor ff_in, ff_in_bias;
    Tensor ff_out, ff_out_bias;

    // Visits (name, tensor) in the fixed serialization order.
    template <typename Self, typename F>
    static void visit(Self& self, F&& fn) {
        fn("ln1_gain", self.ln1_gain);
        fn("ln1_bias", self.ln1_bias);
        fn("wq", self.wq);
        fn("wk", self.wk);
        fn("wv", self.wv);
        fn("wo", self.wo);
        fn("ln2_gain", self.ln2_gain);
        fn("ln2_bias", self.ln2_bias);
        fn("ff_in", self.ff_in);
        fn("ff_in_bias", self.ff_in_bias);
        fn("ff_out", self.ff_out);
        fn("ff_out_bias", self.ff_out_bias);
    }
};

// r^(0) followed by H_1..H_L, each n x d.
struct LayerRepresentations {
    std::vector<Tensor> states;

    [[nodiscard]] std::size_t num_layers() const noexcept { return states.empty() ? 0 : states.size() - 1; }
    [[nodiscard]] const Tensor& input() const { return states.front(); }
    // 1-based.
    [[nodiscard]] const Tensor& layer(std::size_t l) const;
};

// Reduces H_layer (1-based) with the given readout.
std::vector<double> extract_representation(const LayerRepresentations& reps, std::size_t layer, Readout readout);

// Graph form of the same reduction.
Var readout_node(Graph& g, Var hidden, Readout readout);

// Decoder-only transformer with per-layer trainability.
//
// Blocks are pre-norm: h = x + Attn(LN1(x)) W_o, out = h + FF(LN2(h)), with a
// GELU feed-forward. H_l is the residual stream leaving block l. Token and
// positional tables are never trainable.
class LayeredModel {
public:
    LayeredModel(ModelConfig config, std::uint64_t seed);

    [[nodiscard]] const ModelConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::size_t num_layers() const noexcept { return config_.layers; }

    [[nodiscard]] std::vector<std::size_t> tokenize(std::string_view text) const;

    // Rows E[t_i] + P[i]. Throws InvalidArgument for unknown ids or n > max_context.
    [[nodiscard]] Tensor embed(std::span<const std::size_t> tokens) const;

    // Inference pass over all layers.
    [[nodiscard]] LayerRepresentations forward_all_layers(std::span<const std::size_t> tokens) const;

    // Records a pass through blocks 1..upto on `g`. Returns nodes for r^(0), H_1..H_upto.
    // Trainable blocks are bound as parameters; everything else as constants.
    std::vector<Var> forward(Graph& g, std::span<const std::size_t> tokens, std::size_t upto);

    // Same, but binds every tensor read-only.
    std::vector<Var> forward(Graph& g, std::span<const std::size_t> tokens, std::size_t upto) const;

    // Marks exactly the given 1-based layers trainable.
    void set_trainable(std::span<const std::size_t> layers);
    [[nodiscard]] const std::vector<bool>& trainable_mask() const noexcept { return trainable_; }

    // 1-based.
    [[nodiscard]] BlockParams& block(std::size_t l);
    [[nodiscard]] const BlockParams& block(std::size_t l) const;

    [[nodiscard]] Tensor& token_table() noexcept { return embedding_; }
    [[nodiscard]] const Tensor& token_table() const noexcept { return embedding_; }
    [[nodiscard]] Tensor& position_table() noexcept { return positional_; }
    [[nodiscard]] const Tensor& position_table() const noexcept { return positional_; }

    // (name, tensor) pairs in serialization order: embedding, positional, layers.1.*, ...
    void for_each_parameter(const std::function<void(const std::string&, const Tensor&)>& fn) const;
    void for_each_parameter(const std::function<void(const std::string&, Tensor&)>& fn);

    [[nodiscard]] std::size_t block_parameter_count() const;
    [[nodiscard]] std::size_t parameter_count() const;

    // Raw bytes of one block's tensors; used for frozen-layer equality checks.
    [[nodiscard]] std::string block_bytes(std::size_t l) const;

    void clear_grads();

private:
    template <typename Self>
    static std::vector<Var> forward_impl(Self& self, Graph& g, std::span<const std::size_t> tokens, std::size_t upto);

    void check_layer(std::size_t l) const;

    ModelConfig config_;
    Tokenizer tokenizer_;
    Tensor embedding_;
    Tensor positional_;
    std::vector<BlockParams> blocks_;
    std::vector<bool> trainable_;
};

} // namespace laet
