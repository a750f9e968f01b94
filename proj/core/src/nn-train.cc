// core/src/nn-train.cc

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

#include "qbe/nn-train.h"

#include <algorithm>
#include <cmath>

#include "qbe/errors.h"

namespace qbe {

template <typename Real>
XentResult<Real> SoftmaxXent(const Tensor<Real> &logits, std::span<const int> labels,
                             double normalizer) {
  if (logits.rank() != 2 || static_cast<std::size_t>(logits.dim(0)) != labels.size())
    throw DataError("softmax_xent: logits " + ShapeString(logits.shape()) +
                    " do not match " + std::to_string(labels.size()) + " labels");
  const int batch = logits.dim(0), classes = logits.dim(1);
  if (normalizer <= 0.0) normalizer = batch;
  XentResult<Real> r;
  r.grad = Tensor<Real>(logits.shape());
  std::vector<double> p(classes);
  for (int b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || label >= classes)
      throw DataError("softmax_xent: label " + std::to_string(label) +
                      " out of range [0, " + std::to_string(classes) + ")");
    const Real *z = logits.data() + static_cast<std::size_t>(b) * classes;
    const Real zmax = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) sum += (p[c] = std::exp(static_cast<double>(z[c] - zmax)));
    const double log_sum = std::log(sum);
    r.loss += -(static_cast<double>(z[label] - zmax) - log_sum);
    int argmax = 0;
    for (int c = 0; c < classes; ++c) {
      p[c] /= sum;
      if (z[c] > z[argmax]) argmax = c;
      r.grad[static_cast<std::size_t>(b) * classes + c] =
          static_cast<Real>((p[c] - (c == label ? 1.0 : 0.0)) / normalizer);
    }
    if (argmax == label) ++r.correct;
  }
  r.loss /= normalizer;
  return r;
}

template <typename Real>
AdamOptimizer<Real>::AdamOptimizer(std::vector<Param<Real> *> params, AdamOptions opts)
    : opts_(opts) {
  for (Param<Real> *p : params) {
    if (!p->trainable) continue;
    params_.push_back(p);
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

template <typename Real>
void AdamOptimizer<Real>::Step(double learning_rate) {
  ++step_;
  const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param<Real> *p = params_[i];
    auto &m = m_[i];
    auto &v = v_[i];
    for (std::size_t k = 0; k < p->value.size(); ++k) {
      const double g = p->grad[k];
      m[k] = opts_.beta1 * m[k] + (1.0 - opts_.beta1) * g;
      v[k] = opts_.beta2 * v[k] + (1.0 - opts_.beta2) * g * g;
      const double mhat = m[k] / bc1, vhat = v[k] / bc2;
      p->value[k] -= static_cast<Real>(learning_rate * mhat / (std::sqrt(vhat) + opts_.epsilon));
    }
  }
}

double LrSchedule::Update(double dev_loss) {
  if (!std::isfinite(dev_loss)) throw DataError("LrSchedule: non-finite dev loss");
  if (has_previous_ && dev_loss > previous_) lr_ = std::max(lr_ / 2.0, floor_);
  previous_ = dev_loss;
  has_previous_ = true;
  return lr_;
}

namespace {

double RelError(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

double Objective(Layer<double> *layer, const Tensor<double> &x, const Tensor<double> &proj,
                 uint64_t seed) {
  Rng rng(seed);
  Tensor<double> y = layer->Forward(x, rng);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * proj[i];
  return s;
}

}  // namespace

GradCheckResult GradCheck(const LayerSpec &spec, const Tensor<double> &input,
                          double epsilon, uint64_t seed, double denom_floor) {
  auto layer = MakeLayer<double>(spec);
  Rng init(seed);
  layer->Initialize(init);
  // Residual blocks start with a zero second conv; perturb it so that its
  // gradient path is actually exercised.
  for (Param<double> *p : layer->Params())
    if (p->trainable)
      for (auto &v : p->value.vec()) v += init.Uniform(-0.3, 0.3);
  return GradCheck(layer.get(), input, epsilon, seed, denom_floor);
}

GradCheckResult GradCheck(Layer<double> *layer, const Tensor<double> &input,
                          double epsilon, uint64_t seed, double denom_floor) {
  const uint64_t fwd_seed = seed * 7919 + 1;
  Rng rng(fwd_seed);
  Tensor<double> out = layer->Forward(input, rng);
  Tensor<double> proj(out.shape());
  Rng proj_rng(seed + 17);
  for (auto &v : proj.vec()) v = proj_rng.Uniform(-1.0, 1.0);

  layer->ZeroGrad();
  {
    Rng again(fwd_seed);
    layer->Forward(input, again);
  }
  Tensor<double> in_grad = layer->Backward(proj);

  GradCheckResult r;
  Tensor<double> x = input;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + epsilon;
    double fp = Objective(layer, x, proj, fwd_seed);
    x[i] = orig - epsilon;
    double fm = Objective(layer, x, proj, fwd_seed);
    x[i] = orig;
    double e = RelError(in_grad[i], (fp - fm) / (2 * epsilon), denom_floor);
    r.max_input_rel_error = std::max(r.max_input_rel_error, e);
    ++r.checked;
  }
  for (Param<double> *p : layer->Params()) {
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + epsilon;
      double fp = Objective(layer, input, proj, fwd_seed);
      p->value[i] = orig - epsilon;
      double fm = Objective(layer, input, proj, fwd_seed);
      p->value[i] = orig;
      double e = RelError(p->grad[i], (fp - fm) / (2 * epsilon), denom_floor);
      r.max_param_rel_error = std::max(r.max_param_rel_error, e);
      ++r.checked;
    }
  }
  r.max_rel_error = std::max(r.max_input_rel_error, r.max_param_rel_error);
  return r;
}

template XentResult<float> SoftmaxXent(const Tensor<float> &, std::span<const int>, double);
template XentResult<double> SoftmaxXent(const Tensor<double> &, std::span<const int>, double);
template class AdamOptimizer<float>;
template class AdamOptimizer<double>;

}  // namespace qbe
