#pragma once

#include "laet/tensor.hpp"

#include <cstddef>
#include <span>

namespace laet {

// L2 norm over the gradients of all tensors that currently hold one.
double global_grad_norm(std::span<Tensor* const> params);

// Factor that brings `norm` down to `max_norm`; 1 when already within it or when max_norm <= 0.
double clip_factor(double norm, double max_norm);

// p <- p - lr * (clip * grad + weight_decay * p) for every tensor that requires
// and holds a gradient. Gradients are cleared afterwards.
void sgd_step(std::span<Tensor* const> params, double lr, double weight_decay = 0.0, double clip = 1.0);

// eta / (1 + t / t0); constant when t0 <= 0.
double scheduled_rate(double eta, std::size_t t, double t0);

} // namespace laet
