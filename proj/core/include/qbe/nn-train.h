// core/include/qbe/nn-train.h

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

#ifndef QBE_NN_TRAIN_H_
#define QBE_NN_TRAIN_H_

#include <span>
#include <vector>

#include "qbe/nn-layers.h"
#include "qbe/tensor.h"

namespace qbe {

template <typename Real>
struct XentResult {
  double loss = 0.0;         // sum of -log p(label) divided by normalizer
  Tensor<Real> grad;         // (softmax - onehot) / normalizer
  std::size_t correct = 0;   // argmax hits
};

// Softmax cross-entropy over rows of logits [batch x classes]. The loss and
// gradient are divided by `normalizer` (the batch size when <= 0), so that
// a multitask batch split across heads can share one scaling.
template <typename Real>
XentResult<Real> SoftmaxXent(const Tensor<Real> &logits, std::span<const int> labels,
                             double normalizer = 0.0);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction over a fixed list of parameters. Non-trainable
// parameters (batch-norm running statistics) are skipped.
template <typename Real>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<Param<Real> *> params, AdamOptions opts = {});

  void Step(double learning_rate);
  long step_count() const { return step_; }

 private:
  std::vector<Param<Real> *> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamOptions opts_;
  long step_ = 0;
};

// Halve the learning rate whenever the development loss goes up relative to
// the previous epoch, never dropping below the floor.
class LrSchedule {
 public:
  explicit LrSchedule(double initial = 1e-3, double floor = 1e-4)
      : lr_(initial), floor_(floor) {}

  // Returns the learning rate to use for the next epoch.
  double Update(double dev_loss);

  double lr() const { return lr_; }
  double floor() const { return floor_; }
  bool has_previous() const { return has_previous_; }
  double previous_dev_loss() const { return previous_; }

 private:
  double lr_;
  double floor_;
  double previous_ = 0.0;
  bool has_previous_ = false;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_input_rel_error = 0.0;
  double max_param_rel_error = 0.0;
  std::size_t checked = 0;
};

// Compares the analytic input and parameter gradients of a freshly
// initialised 64-bit layer against central finite differences of
// L = sum(out * R) for a fixed random projection R. Relative error is
// |a - n| / max(|a|, |n|, denom_floor).
GradCheckResult GradCheck(const LayerSpec &spec, const Tensor<double> &input,
                          double epsilon = 1e-5, uint64_t seed = 7,
                          double denom_floor = 1e-6);

// Same check for an already-constructed layer.
GradCheckResult GradCheck(Layer<double> *layer, const Tensor<double> &input,
                          double epsilon = 1e-5, uint64_t seed = 7,
                          double denom_floor = 1e-6);

}  // namespace qbe

#endif  // QBE_NN_TRAIN_H_
