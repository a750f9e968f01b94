// core/include/qbe/nn-layers.h

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

#ifndef QBE_NN_LAYERS_H_
#define QBE_NN_LAYERS_H_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qbe/rng.h"
#include "qbe/tensor.h"

namespace qbe {

enum class LayerKind : uint8_t {
  kDense = 0,
  kLayerNorm = 1,
  kBatchNorm = 2,
  kConv3x3 = 3,
  kConv1x1 = 4,
  kRelu = 5,
  kDropout = 6,
  kGlobalAvgPool = 7,
  kResidual = 8,  // two 3x3 convs + batch norms, optional 1x1 projection
};

const char *LayerKindName(LayerKind kind);

// Serializable description of one layer. Field meaning by kind:
//   dense: in -> out;  layernorm/batchnorm: in = feature/channel count;
//   conv3x3/conv1x1/residual: in/out channels, stride in {1, 2};
//   dropout: rate.
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  int in = 0;
  int out = 0;
  int stride = 1;
  float rate = 0.0f;

  static LayerSpec Dense(int in, int out) { return {LayerKind::kDense, in, out}; }
  static LayerSpec LayerNorm(int dim) { return {LayerKind::kLayerNorm, dim, dim}; }
  static LayerSpec BatchNorm(int channels) {
    return {LayerKind::kBatchNorm, channels, channels};
  }
  static LayerSpec Conv3x3(int in, int out, int stride) {
    return {LayerKind::kConv3x3, in, out, stride};
  }
  static LayerSpec Conv1x1(int in, int out, int stride) {
    return {LayerKind::kConv1x1, in, out, stride};
  }
  static LayerSpec Relu() { return {LayerKind::kRelu}; }
  static LayerSpec Dropout(float rate) { return {LayerKind::kDropout, 0, 0, 1, rate}; }
  static LayerSpec GlobalAvgPool() { return {LayerKind::kGlobalAvgPool}; }
  static LayerSpec Residual(int in, int out, int stride) {
    return {LayerKind::kResidual, in, out, stride};
  }

  std::string ToString() const;
  friend bool operator==(const LayerSpec &, const LayerSpec &) = default;
};

template <typename Real>
struct Param {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> grad;
  bool trainable = true;  // false for batch-norm running statistics
};

// A layer with an exact analytic backward pass.
//
// Forward() runs in training mode and caches what Backward() needs;
// Backward() adds parameter gradients into Param::grad and returns the
// gradient with respect to the input of the last Forward(). Infer() is the
// inference-mode pass; it is const and safe to call concurrently.
template <typename Real>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerSpec spec() const = 0;
  virtual Tensor<Real> Infer(const Tensor<Real> &in) const = 0;
  virtual Tensor<Real> Forward(const Tensor<Real> &in, Rng &rng) = 0;
  virtual Tensor<Real> Backward(const Tensor<Real> &out_grad) = 0;
  virtual std::vector<Param<Real> *> Params() { return {}; }
  virtual void Initialize(Rng &) {}

  std::vector<const Param<Real> *> Params() const;
  std::size_t NumTrainable() const;
  void ZeroGrad();
};

template <typename Real>
std::unique_ptr<Layer<Real>> MakeLayer(const LayerSpec &spec);

// Pure helpers shared by the layer classes; exposed for tests.
template <typename Real>
Tensor<Real> Relu(const Tensor<Real> &x);

}  // namespace qbe

#endif  // QBE_NN_LAYERS_H_
