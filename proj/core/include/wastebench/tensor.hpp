#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace wastebench::nn {

using Scalar = double;
using Shape = std::vector<std::int64_t>;

// Dense row-major tensor. Copies are shallow (shared buffer); clone() makes
// the deep copy. Parameters and gradients are mutated in place by design;
// everything else treats tensors as write-once.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, Scalar value);
    static Tensor from(Shape shape, std::vector<Scalar> values);

    bool defined() const { return static_cast<bool>(buffer_); }
    std::int64_t size() const { return size_; }
    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }

    Scalar* data() { return buffer_->data(); }
    const Scalar* data() const { return buffer_->data(); }
    Scalar& operator[](std::int64_t i) { return (*buffer_)[static_cast<std::size_t>(i)]; }
    Scalar operator[](std::int64_t i) const { return (*buffer_)[static_cast<std::size_t>(i)]; }

    Tensor clone() const;
    // Same buffer, new shape; element count must match.
    Tensor reshaped(Shape shape) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    void fill(Scalar value);
    void zero() { fill(0.0); }

    bool all_finite() const;

private:
    Shape shape_;
    std::int64_t size_ = 0;
    std::shared_ptr<std::vector<Scalar>> buffer_;
};

std::int64_t shape_numel(const Shape& shape);

}  // namespace wastebench::nn
