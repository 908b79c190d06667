#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace laet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major tensor of 64-bit floats with an optional gradient slot.
//
// Invariants: product(shape) == data.size(); a present gradient has the same
// length as data; values handed to the constructors are finite.
class Tensor {
public:
    Tensor() = default;

    // Zero-filled tensor.
    explicit Tensor(Shape shape);

    // Throws InvalidArgument if sizes disagree or any value is NaN/Inf.
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);
    static Tensor vector(std::initializer_list<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    // Rows/cols view a tensor as a matrix: rank-1 is a single row.
    [[nodiscard]] std::size_t rows() const noexcept {
        return shape_.size() <= 1 ? 1 : data_.size() / shape_.back();
    }
    [[nodiscard]] std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double& at(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
    [[nodiscard]] double at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

    [[nodiscard]] std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols(), cols()}; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols(), cols()};
    }

    [[nodiscard]] bool requires_grad() const noexcept { return requires_grad_; }
    void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

    [[nodiscard]] bool has_grad() const noexcept { return grad_.has_value(); }
    [[nodiscard]] std::span<const double> grad() const;
    [[nodiscard]] std::span<double> grad();
    void accumulate_grad(std::span<const double> delta, double scale = 1.0);
    void clear_grad() noexcept { grad_.reset(); }

    [[nodiscard]] bool all_finite() const noexcept;

    // Bitwise comparison of shape and values (gradients and flags ignored).
    [[nodiscard]] bool bitwise_equal(const Tensor& other) const noexcept;

private:
    Shape shape_;
    std::vector<double> data_;
    std::optional<std::vector<double>> grad_;
    bool requires_grad_ = false;
};

} // namespace laet
