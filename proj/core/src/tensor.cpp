#include "wastebench/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wastebench::nn {

std::int64_t shape_numel(const Shape& shape) {
    std::int64_t n = 1;
    for (std::int64_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)),
      size_(shape_numel(shape_)),
      buffer_(std::make_shared<std::vector<Scalar>>(static_cast<std::size_t>(size_), 0.0)) {}

Tensor Tensor::full(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::from(Shape shape, std::vector<Scalar> values) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
        throw std::invalid_argument("Tensor::from: element count does not match shape");
    Tensor t;
    t.shape_ = std::move(shape);
    t.size_ = static_cast<std::int64_t>(values.size());
    t.buffer_ = std::make_shared<std::vector<Scalar>>(std::move(values));
    return t;
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.size_ = size_;
    t.buffer_ = buffer_ ? std::make_shared<std::vector<Scalar>>(*buffer_) : nullptr;
    return t;
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != size_)
        throw std::invalid_argument("Tensor::reshaped: element count mismatch");
    Tensor t;
    t.shape_ = std::move(shape);
    t.size_ = size_;
    t.buffer_ = buffer_;
    return t;
}

void Tensor::fill(Scalar value) {
    if (buffer_) std::fill(buffer_->begin(), buffer_->end(), value);
}

bool Tensor::all_finite() const {
    if (!buffer_) return true;
    for (Scalar v : *buffer_)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace wastebench::nn
