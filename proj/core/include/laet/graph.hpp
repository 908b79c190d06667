#pragma once

#include "laet/tensor.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace laet {

// Handle to a node of a Graph. Only meaningful together with the graph that issued it.
struct Var {
    std::uint32_t id = 0;
};

// One recorded operation: its id, the node ids it consumed and the node it produced.
struct RecordEntry {
    std::string_view op;
    std::vector<std::size_t> inputs;
    std::size_t output;
};

// Computation record for reverse-mode differentiation.
//
// Values are computed eagerly as operations are recorded. Node ids are issued
// in creation order, so the record is topologically sorted by construction.
// Parameters are bound by reference: the graph reads their values and, on
// flush, adds gradients into their grad slot if and only if requires_grad is set.
//
// A graph is single-writer. Separate graphs may read the same parameters
// concurrently; their gradients are flushed into the parameters serially.
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, std::span<const double> out_grad)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;
    Graph(Graph&&) = default;
    Graph& operator=(Graph&&) = default;

    // Leaf referencing an external parameter tensor, which must outlive the graph.
    Var param(Tensor& tensor);

    // Leaf owning a constant value; never receives a gradient.
    Var constant(Tensor value);

    // Leaf reading an external tensor without ever producing a gradient for it.
    Var constant_ref(const Tensor& tensor);

    [[nodiscard]] const Tensor& value(Var v) const;
    [[nodiscard]] bool needs_grad(Var v) const;
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] std::vector<RecordEntry> entries() const;

    // Used by operation implementations. `backward` may be empty when no input needs a gradient.
    Var record(std::string_view op, std::vector<Var> inputs, Tensor value, BackwardFn backward);

    // Accumulator for a node's gradient; allocated on first access. Only valid
    // for nodes with needs_grad() == true.
    std::span<double> grad_of(Var v);

    // Gradient accumulated at a node during propagate(); empty span if none reached it.
    [[nodiscard]] std::span<const double> node_grad(Var v) const;

    // propagate() followed by flush(1.0).
    void backward(Var loss);

    // Reverse sweep from a scalar node, filling node-local gradients only.
    void propagate(Var loss, double seed = 1.0);

    // Adds node-local gradients of bound parameters into their grad slots, times `scale`.
    void flush(double scale = 1.0);

private:
    struct Node {
        std::string_view op;
        std::vector<Var> inputs;
        Tensor value;
        const Tensor* external = nullptr;
        Tensor* bound = nullptr;
        bool needs_grad = false;
        std::vector<double> grad;
        BackwardFn backward;
    };

    const Node& node(Var v) const;
    Node& node(Var v);

    std::vector<Node> nodes_;
};

} // namespace laet
