#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dvrm/common.hpp"

namespace dvrm {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

/// Dense row-major tensor. Data is owned; there are no views. The autodiff
/// tape and the model layers treat these as value types.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0))
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

    Tensor(Shape shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_numel(shape_))
            throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    static Tensor scalar(T v) { return Tensor({1}, std::vector<T>{v}); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const {
        if (axis >= shape_.size())
            throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                             shape_str(shape_));
        return shape_[axis];
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    bool requires_grad = false;

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    Tensor reshaped(Shape new_shape) const {
        if (shape_numel(new_shape) != numel())
            throw ShapeError("reshape from " + shape_str(shape_) + " to " +
                             shape_str(new_shape) + " changes element count");
        Tensor out = *this;
        out.shape_ = std::move(new_shape);
        return out;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    /// Convert element type (used to move between f32 training and f64 checks).
    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < data_.size(); ++i)
            out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() == b.shape()) return;
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    std::size_t axis = 0;
    if (sa.size() == sb.size()) {
        while (axis < sa.size() && sa[axis] == sb[axis]) ++axis;
        throw ShapeError(std::string(op) + ": shapes differ at axis " + std::to_string(axis) +
                         ": " + shape_str(sa) + " vs " + shape_str(sb));
    }
    throw ShapeError(std::string(op) + ": rank mismatch: " + shape_str(sa) + " vs " +
                     shape_str(sb));
}

} // namespace dvrm
