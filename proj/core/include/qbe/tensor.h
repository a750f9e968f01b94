// core/include/qbe/tensor.h

// Copyright 2026  The qbe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef QBE_TENSOR_H_
#define QBE_TENSOR_H_

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace qbe {

// Dense row-major array. 2-D tensors are [batch x features]; 4-D tensors
// are [batch x channels x height x width].
template <typename Real>
class Tensor {
 public:
  // Cache-line aligned so vectorised kernels see the same data layout, and
  // hence the same summation order, on every run.
  using Storage = std::vector<Real, Eigen::aligned_allocator<Real>>;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape, Real fill = Real(0))
      : shape_(std::move(shape)), data_(Count(shape_), fill) {}
  Tensor(std::vector<int> shape, const std::vector<Real> &data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (data_.size() != Count(shape_))
      throw std::invalid_argument("Tensor: data size does not match shape");
  }

  const std::vector<int> &shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }

  Real *data() { return data_.data(); }
  const Real *data() const { return data_.data(); }
  Storage &vec() { return data_; }
  const Storage &vec() const { return data_; }

  Real &operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  void Fill(Real v) { std::fill(data_.begin(), data_.end(), v); }
  void Reshape(std::vector<int> shape) {
    if (Count(shape) != data_.size())
      throw std::invalid_argument("Tensor::Reshape: element count changes");
    shape_ = std::move(shape);
  }

  bool AllFinite() const {
    for (Real v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  static std::size_t Count(const std::vector<int> &shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<std::size_t>());
  }

 private:
  std::vector<int> shape_;
  Storage data_;
};

inline std::string ShapeString(const std::vector<int> &shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    s += (i ? "x" : "") + std::to_string(shape[i]);
  return s + "]";
}

}  // namespace qbe

#endif  // QBE_TENSOR_H_
