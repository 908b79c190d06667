#include "laet/graph.hpp"

#include "laet/error.hpp"

namespace laet {

const Graph::Node& Graph::node(Var v) const {
    if (v.id >= nodes_.size()) {
        throw ContractViolation("variable does not belong to this graph");
    }
    return nodes_[v.id];
}

Graph::Node& Graph::node(Var v) {
    if (v.id >= nodes_.size()) {
        throw ContractViolation("variable does not belong to this graph");
    }
    return nodes_[v.id];
}

Var Graph::param(Tensor& tensor) {
    Node n;
    n.op = "param";
    n.bound = &tensor;
    n.external = &tensor;
    n.needs_grad = tensor.requires_grad();
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor value) {
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant_ref(const Tensor& tensor) {
    Node n;
    n.op = "constant";
    n.external = &tensor;
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Graph::value(Var v) const {
    const Node& n = node(v);
    return n.external != nullptr ? *n.external : n.value;
}

bool Graph::needs_grad(Var v) const { return node(v).needs_grad; }

std::vector<RecordEntry> Graph::entries() const {
    std::vector<RecordEntry> out;
    out.reserve(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        RecordEntry e{nodes_[i].op, {}, i};
        for (Var in : nodes_[i].inputs) {
            e.inputs.push_back(in.id);
        }
        out.push_back(std::move(e));
    }
    return out;
}

Var Graph::record(std::string_view op, std::vector<Var> inputs, Tensor value, BackwardFn backward) {
    Node n;
    n.op = op;
    for (Var in : inputs) {
        if (node(in).needs_grad) {
            n.needs_grad = true;
        }
    }
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    if (n.needs_grad) {
        n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

std::span<double> Graph::grad_of(Var v) {
    Node& n = node(v);
    if (!n.needs_grad) {
        throw ContractViolation("gradient requested for a node that does not need one");
    }
    if (n.grad.empty()) {
        n.grad.assign(value(v).size(), 0.0);
    }
    return n.grad;
}

std::span<const double> Graph::node_grad(Var v) const { return node(v).grad; }

void Graph::backward(Var loss) {
    propagate(loss);
    flush(1.0);
}

void Graph::propagate(Var loss, double seed) {
    const Node& root = node(loss);
    if (value(loss).size() != 1) {
        throw ContractViolation("backward requires a scalar loss, got shape " + shape_string(value(loss).shape()));
    }
    if (!root.needs_grad) {
        return;
    }
    grad_of(loss)[0] += seed;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.needs_grad || n.grad.empty() || !n.backward) {
            continue;
        }
        // The closure may grow other nodes' grads but never this node's storage.
        n.backward(*this, n.grad);
    }
}

void Graph::flush(double scale) {
    for (Node& n : nodes_) {
        if (n.bound != nullptr && n.needs_grad && !n.grad.empty()) {
            n.bound->accumulate_grad(n.grad, scale);
        }
    }
}

} // namespace laet
