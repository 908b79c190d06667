#pragma once

#include "laet/graph.hpp"

#include <cstddef>
#include <span>
#include <vector>

// Differentiable operations recorded on a Graph. Matrices are row-major; a
// rank-1 tensor of length n behaves as a 1 x n row. Shape mismatches are
// programming errors and raise ContractViolation.
namespace laet::ops {

// [m x k] * [k x n] -> [m x n]
Var matmul(Graph& g, Var a, Var b);

Var add(Graph& g, Var a, Var b);
Var mul(Graph& g, Var a, Var b);
Var scale(Graph& g, Var x, double factor);

// Adds a length-n bias to every row of an [m x n] matrix.
Var add_bias(Graph& g, Var x, Var bias);

// x * W + b for x [m x in], W [in x out], b [out].
Var linear(Graph& g, Var x, Var weight, Var bias);

// (x - mean) * inv_std per column with constant statistics.
Var standardize(Graph& g, Var x, std::span<const double> mean, std::span<const double> inv_std);

Var relu(Graph& g, Var x);

// Exact GELU: 0.5 x (1 + erf(x / sqrt 2)).
Var gelu(Graph& g, Var x);

// Row-wise layer normalization with learned gain and bias of length n.
Var layer_norm(Graph& g, Var x, Var gain, Var bias, double eps = 1e-5);

// Gathers rows of `table` [V x d] for the given ids -> [n x d].
Var embedding(Graph& g, Var table, std::span<const std::size_t> ids);

// Rows [0, n) of `table`.
Var leading_rows(Graph& g, Var table, std::size_t n);

// Causal multi-head scaled dot-product attention over [n x d] projections;
// position i attends to positions j <= i only.
Var causal_attention(Graph& g, Var q, Var k, Var v, std::size_t heads);

// [m x n] -> [1 x n]
Var select_row(Graph& g, Var x, std::size_t row);
Var sum_rows(Graph& g, Var x);
Var mean_rows(Graph& g, Var x);

// Sum of all entries -> scalar.
Var sum(Graph& g, Var x);

// Arithmetic mean of scalar nodes -> scalar.
Var mean_of(Graph& g, std::span<const Var> scalars);

// Mean over rows of -log(max(softmax(logits_i)[label_i], eps)).
Var softmax_cross_entropy(Graph& g, Var logits, std::span<const std::size_t> labels);

// Mean squared error of an [m x 1] prediction column against targets.
Var mse(Graph& g, Var predictions, std::span<const double> targets);

} // namespace laet::ops
