#pragma once

#include "laet/tensor.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace laet::numerics {

// Lower clamp applied to probabilities before taking the log in cross-entropy.
inline constexpr double kLogClamp = 1e-12;

// Max-subtracted softmax. Throws InvalidArgument on empty or non-finite input.
std::vector<double> softmax(std::span<const double> logits);

// -log(max(probs[label], kLogClamp)). probs must sum to 1 within 1e-9.
double cross_entropy(std::span<const double> probs, std::size_t label);

// Mean cross-entropy over a batch (the 1/N-averaged layer loss).
double cross_entropy(std::span<const std::vector<double>> probs, std::span<const std::size_t> labels);

// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

// Central-difference gradient of f at x with step h, one coordinate at a time.
// Throws NumericError if f returns a non-finite value.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

} // namespace laet::numerics
