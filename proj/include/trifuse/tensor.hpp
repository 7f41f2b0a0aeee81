#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "trifuse/common.hpp"

namespace trifuse {

/// Dense row-major float64 tensor. Construction rejects NaN/Inf, so a Tensor
/// that exists holds only finite values.
class Tensor {
public:
    Tensor() = default;

    // Zero-filled.
    explicit Tensor(std::vector<std::size_t> shape);

    // Takes ownership of the buffer; validates size and finiteness.
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor row(std::vector<double> v);          // shape [1, n]
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // 2-D accessors; contract error on other ranks.
    std::size_t rows() const;
    std::size_t cols() const;
    double at(std::size_t r, std::size_t c) const;
    double& at(std::size_t r, std::size_t c);

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    const double* data() const { return data_.data(); }
    double* data() { return data_.data(); }
    std::span<const double> values() const { return data_; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    std::string shape_str() const;

    void fill(double v);

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

}  // namespace trifuse
