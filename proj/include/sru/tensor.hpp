// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Dense rank-1/2/3 tensors, row-major contiguous. Index (i,j,k) maps to
// data[i*s1*s2 + j*s2 + k] for shape (s0,s1,s2); the time axis is stored
// outermost so every time-step slice of an (L,B,d) tensor is one
// contiguous block.

#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <vector>

#include "sru/common.hpp"

namespace sru {

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 3) {
      throw ParamError("tensor rank must be 1, 2 or 3");
    }
    int64_t n = 1;
    for (int64_t e : shape_) {
      if (e < 0) throw ParamError("negative tensor extent");
      n *= e;
    }
    data_.assign(static_cast<size_t>(n), T(0));
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t extent(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  T& operator()(int64_t i) { return data_[static_cast<size_t>(i)]; }
  const T& operator()(int64_t i) const { return data_[static_cast<size_t>(i)]; }

  T& operator()(int64_t i, int64_t j) {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }
  const T& operator()(int64_t i, int64_t j) const {
    return data_[static_cast<size_t>(i * shape_[1] + j)];
  }

  T& operator()(int64_t i, int64_t j, int64_t k) {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  const T& operator()(int64_t i, int64_t j, int64_t k) const {
    return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  template <typename U>
  Tensor<U> cast() const {
    if (shape_.empty()) return Tensor<U>();
    Tensor<U> out(shape_);
    for (int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<size_t>(i)]);
    return out;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
  }

 private:
  std::vector<int64_t> shape_;
  std::vector<T> data_;
};

using TensorF64 = Tensor<double>;
using TensorF32 = Tensor<float>;

}  // namespace sru
