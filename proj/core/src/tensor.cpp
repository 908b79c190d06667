#include "laet/tensor.hpp"

#include "laet/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

namespace laet {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i != 0) {
            out += ", ";
        }
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

namespace {

void check_shape(const Shape& shape) {
    if (shape.empty()) {
        throw InvalidArgument("tensor shape must have at least one extent");
    }
    if (std::ranges::any_of(shape, [](std::size_t e) { return e == 0; })) {
        throw InvalidArgument("tensor extents must be positive, got " + shape_string(shape));
    }
}

} // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_size(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (shape_size(shape_) != data_.size()) {
        throw InvalidArgument("tensor of shape " + shape_string(shape_) + " cannot hold " +
                              std::to_string(data_.size()) + " values");
    }
    if (!all_finite()) {
        throw InvalidArgument("tensor values must be finite");
    }
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vector(std::initializer_list<double> values) { return Tensor({values.size()}, values); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor({rows, cols}, values);
}

std::span<const double> Tensor::grad() const {
    if (!grad_) {
        throw ContractViolation("tensor has no gradient");
    }
    return *grad_;
}

std::span<double> Tensor::grad() {
    if (!grad_) {
        throw ContractViolation("tensor has no gradient");
    }
    return *grad_;
}

void Tensor::accumulate_grad(std::span<const double> delta, double scale) {
    if (delta.size() != data_.size()) {
        throw ContractViolation("gradient length mismatch");
    }
    if (!grad_) {
        grad_.emplace(data_.size(), 0.0);
    }
    auto& g = *grad_;
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += scale * delta[i];
    }
}

bool Tensor::all_finite() const noexcept {
    return std::ranges::all_of(data_, [](double v) { return std::isfinite(v); });
}

bool Tensor::bitwise_equal(const Tensor& other) const noexcept {
    return shape_ == other.shape_ && data_.size() == other.data_.size() &&
           (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

} // namespace laet
