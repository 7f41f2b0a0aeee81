#include "trifuse/tensor.hpp"

#include <cmath>

namespace trifuse {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

}  // namespace

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {
    if (shape_.empty()) throw ContractError("tensor shape must have at least one dimension");
    for (std::size_t d : shape_)
        if (d == 0) throw ContractError("tensor dimensions must be positive: " + trifuse::shape_str(shape_));
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty()) throw ContractError("tensor shape must have at least one dimension");
    for (std::size_t d : shape_)
        if (d == 0) throw ContractError("tensor dimensions must be positive: " + trifuse::shape_str(shape_));
    if (shape_numel(shape_) != data_.size())
        throw ContractError("tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + trifuse::shape_str(shape_));
    for (std::size_t i = 0; i < data_.size(); ++i) {
        if (!std::isfinite(data_[i]))
            throw DataError("non-finite value at flat index " + std::to_string(i) +
                            " in tensor of shape " + trifuse::shape_str(shape_));
    }
}

Tensor Tensor::row(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({1, n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ContractError("rows() on tensor of shape " + trifuse::shape_str(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw ContractError("cols() on tensor of shape " + trifuse::shape_str(shape_));
    return shape_[1];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
}

double& Tensor::at(std::size_t r, std::size_t c) {
    return data_[r * cols() + c];
}

std::string Tensor::shape_str() const { return trifuse::shape_str(shape_); }

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

}  // namespace trifuse
