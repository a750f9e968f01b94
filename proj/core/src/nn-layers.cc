// core/src/nn-layers.cc

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

#include "qbe/nn-layers.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qbe/errors.h"

namespace qbe {

namespace {

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatMap = Eigen::Map<RowMat<Real>>;
template <typename Real>
using ConstMatMap = Eigen::Map<const RowMat<Real>>;

constexpr double kNormEpsilon = 1e-5;
constexpr double kBatchNormMomentum = 0.9;

void Require(bool cond, const std::string &msg) {
  if (!cond) throw DataError(msg);
}

template <typename Real>
void UniformFanIn(Tensor<Real> *w, int fan_in, Rng &rng) {
  const double a = std::sqrt(3.0 / fan_in);
  for (auto &v : w->vec()) v = static_cast<Real>(rng.Uniform(-a, a));
}

// ---------------------------------------------------------------- dense

template <typename Real>
class DenseLayer : public Layer<Real> {
 public:
  DenseLayer(int in, int out) : in_(in), out_(out) {
    weight_ = {"weight", Tensor<Real>({in, out}), Tensor<Real>({in, out})};
    bias_ = {"bias", Tensor<Real>({out}), Tensor<Real>({out})};
  }

  LayerSpec spec() const override { return LayerSpec::Dense(in_, out_); }

  Tensor<Real> Infer(const Tensor<Real> &in) const override {
    Require(in.rank() == 2 && in.dim(1) == in_,
            "dense: expected input [batch x " + std::to_string(in_) + "], got " +
                ShapeString(in.shape()));
    const int batch = in.dim(0);
    Tensor<Real> out({batch, out_});
    MatMap<Real> y(out.data(), batch, out_);
    y.noalias() = ConstMatMap<Real>(in.data(), batch, in_) *
                  ConstMatMap<Real>(weight_.value.data(), in_, out_);
    y.rowwise() += Eigen::Map<const Eigen::Matrix<Real, 1, Eigen::Dynamic>>(
        bias_.value.data(), out_);
    return out;
  }

  Tensor<Real> Forward(const Tensor<Real> &in, Rng &) override {
    input_ = in;
    return Infer(in);
  }

  Tensor<Real> Backward(const Tensor<Real> &out_grad) override {
    const int batch = input_.dim(0);
    Require(out_grad.rank() == 2 && out_grad.dim(0) == batch && out_grad.dim(1) == out_,
            "dense: gradient shape mismatch");
    ConstMatMap<Real> dy(out_grad.data(), batch, out_);
    ConstMatMap<Real> x(input_.data(), batch, in_);
    MatMap<Real>(weight_.grad.data(), in_, out_).noalias() += x.transpose() * dy;
    Eigen::Map<Eigen::Matrix<Real, 1, Eigen::Dynamic>>(bias_.grad.data(), out_) +=
        dy.colwise().sum();
    Tensor<Real> in_grad({batch, in_});
    MatMap<Real>(in_grad.data(), batch, in_).noalias() =
        dy * ConstMatMap<Real>(weight_.value.data(), in_, out_).transpose();
    return in_grad;
  }

  std::vector<Param<Real> *> Params() override { return {&weight_, &bias_}; }

  void Initialize(Rng &rng) override {
    UniformFanIn(&weight_.value, in_, rng);
    bias_.value.Fill(0);
  }

 private:
  int in_, out_;
  Param<Real> weight_, bias_;
  Tensor<Real> input_;
};

// ----------------------------------------------------------- layer norm

template <typename Real>
class LayerNormLayer : public Layer<Real> {
 public:
  explicit LayerNormLayer(int dim) : dim_(dim) {
    Require(dim >= 2, "layernorm: dimension must be >= 2");
    gain_ = {"gain", Tensor<Real>({dim}, Real(1)), Tensor<Real>({dim})};
    bias_ = {"bias", Tensor<Real>({dim}), Tensor<Real>({dim})};
  }

  LayerSpec spec() const override { return LayerSpec::LayerNorm(dim_); }

  Tensor<Real> Infer(const Tensor<Real> &in) const override {
    Tensor<Real> normed, inv_std;
    return Compute(in, &normed, &inv_std);
  }

  Tensor<Real> Forward(const Tensor<Real> &in, Rng &) override {
    return Compute(in, &normed_, &inv_std_);
  }

  Tensor<Real> Backward(const Tensor<Real> &out_grad) override {
    const int batch = normed_.dim(0);
    Tensor<Real> in_grad({batch, dim_});
    std::vector<double> dxhat(dim_);
    for (int b = 0; b < batch; ++b) {
      const Real *xh = normed_.data() + b * dim_;
      const Real *dy = out_grad.data() + b * dim_;
      double mean_dxhat = 0, mean_dxhat_xhat = 0;
      for (int k = 0; k < dim_; ++k) {
        gain_.grad[k] += dy[k] * xh[k];
        bias_.grad[k] += dy[k];
        dxhat[k] = static_cast<double>(dy[k]) * gain_.value[k];
        mean_dxhat += dxhat[k];
        mean_dxhat_xhat += dxhat[k] * xh[k];
      }
      mean_dxhat /= dim_;
      mean_dxhat_xhat /= dim_;
      Real *dx = in_grad.data() + b * dim_;
      for (int k = 0; k < dim_; ++k)
        dx[k] = static_cast<Real>(inv_std_[b] *
                                  (dxhat[k] - mean_dxhat - xh[k] * mean_dxhat_xhat));
    }
    return in_grad;
  }

  std::vector<Param<Real> *> Params() override { return {&gain_, &bias_}; }

  void Initialize(Rng &) override {
    gain_.value.Fill(1);
    bias_.value.Fill(0);
  }

 private:
  Tensor<Real> Compute(const Tensor<Real> &in, Tensor<Real> *normed,
                       Tensor<Real> *inv_std) const {
    Require(in.rank() == 2 && in.dim(1) == dim_,
            "layernorm: expected [batch x " + std::to_string(dim_) + "], got " +
                ShapeString(in.shape()));
    const int batch = in.dim(0);
    Tensor<Real> out({batch, dim_});
    *normed = Tensor<Real>({batch, dim_});
    *inv_std = Tensor<Real>({batch});
    for (int b = 0; b < batch; ++b) {
      const Real *x = in.data() + b * dim_;
      double mean = 0, var = 0;
      for (int k = 0; k < dim_; ++k) mean += x[k];
      mean /= dim_;
      for (int k = 0; k < dim_; ++k) var += (x[k] - mean) * (x[k] - mean);
      var /= dim_;
      double is = 1.0 / std::sqrt(var + kNormEpsilon);
      (*inv_std)[b] = static_cast<Real>(is);
      for (int k = 0; k < dim_; ++k) {
        Real xh = static_cast<Real>((x[k] - mean) * is);
        (*normed)[b * dim_ + k] = xh;
        out[b * dim_ + k] = gain_.value[k] * xh + bias_.value[k];
      }
    }
    return out;
  }

  int dim_;
  Param<Real> gain_, bias_;
  Tensor<Real> normed_, inv_std_;
};

// ----------------------------------------------------------- batch norm

// Normalises each channel over batch x height x width. Accepts [N x C] or
// [N x C x H x W].
template <typename Real>
class BatchNormLayer : public Layer<Real> {
 public:
  explicit BatchNormLayer(int channels) : channels_(channels) {
    gamma_ = {"gamma", Tensor<Real>({channels}, Real(1)), Tensor<Real>({channels})};
    beta_ = {"beta", Tensor<Real>({channels}), Tensor<Real>({channels})};
    running_mean_ = {"running_mean", Tensor<Real>({channels}), Tensor<Real>({channels}),
                     false};
    running_var_ = {"running_var", Tensor<Real>({channels}, Real(1)),
                    Tensor<Real>({channels}), false};
  }

  LayerSpec spec() const override { return LayerSpec::BatchNorm(channels_); }

  Tensor<Real> Infer(const Tensor<Real> &in) const override {
    auto [batch, spatial] = Dims(in);
    Tensor<Real> out(in.shape());
    for (int c = 0; c < channels_; ++c) {
      double is = 1.0 / std::sqrt(running_var_.value[c] + kNormEpsilon);
      for (int n = 0; n < batch; ++n) {
        std::size_t base = (static_cast<std::size_t>(n) * channels_ + c) * spatial;
        for (int s = 0; s < spatial; ++s)
          out[base + s] = static_cast<Real>(
              gamma_.value[c] * (in[base + s] - running_mean_.value[c]) * is +
              beta_.value[c]);
      }
    }
    return out;
  }

  Tensor<Real> Forward(const Tensor<Real> &in, Rng &) override {
    auto [batch, spatial] = Dims(in);
    if (batch < 2) throw DataError("batchnorm: training mode requires batch >= 2");
    const double count = static_cast<double>(batch) * spatial;
    Tensor<Real> out(in.shape());
    normed_ = Tensor<Real>(in.shape());
    inv_std_.assign(channels_, 0.0);
    for (int c = 0; c < channels_; ++c) {
      double mean = 0, var = 0;
      for (int n = 0; n < batch; ++n) {
        std::size_t base = (static_cast<std::size_t>(n) * channels_ + c) * spatial;
        for (int s = 0; s < spatial; ++s) mean += in[base + s];
      }
      mean /= count;
      for (int n = 0; n < batch; ++n) {
        std::size_t base = (static_cast<std::size_t>(n) * channels_ + c) * spatial;
        for (int s = 0; s < spatial; ++s) var += (in[base + s] - mean) * (in[base + s] - mean);
      }
      var /= count;
      double is = 1.0 / std::sqrt(var + kNormEpsilon);
      inv_std_[c] = is;
      for (int n = 0; n < batch; ++n) {
        std::size_t base = (static_cast<std::size_t>(n) * channels_ + c) * spatial;
        for (int s = 0; s < spatial; ++s) {
          Real xh = static_cast<Real>((in[base + s] - mean) * is);
          normed_[base + s] = xh;
          out[base + s] = gamma_.value[c] * xh + beta_.value[c];
        }
      }
      running_mean_.value[c] = static_cast<Real>(
          kBatchNormMomentum * running_mean_.value[c] + (1 - kBatchNormMomentum) * mean);
      double unbiased = count > 1 ? var * count / (count - 1) : var;
      running_var_.value[c] = static_cast<Real>(
          kBatchNormMomentum * running_var_.value[c] + (1 - kBatchNormMomentum) * unbiased);
    }
    return out;
  }

  Tensor<Real> Backward(const Tensor<Real> &out_grad) override {
    auto [batch, spatial] = Dims(normed_);
    const double count = static_cast<double>(batch) * spatial;
    Tensor<Real> in_grad(normed_.shape());
    for (int c = 0; c < channels_; ++c) {
      double sum_dy = 0, sum_dy_xh = 0;
      for (int n = 0; n < batch; ++n) {
        std::size_t base = (static_cast<std::size_t>(n) * channels_ + c) * spatial;
        for (int s = 0; s < spatial; ++s) {
          sum_dy += out_grad[base + s];
          sum_dy_xh += static_cast<double>(out_grad[base + s]) * normed_[base + s];
        }
      }
      gamma_.grad[c] += static_cast<Real>(sum_dy_xh);
      beta_.grad[c] += static_cast<Real>(sum_dy);
      const double scale = gamma_.value[c] * inv_std_[c];
      const double mean_dy = sum_dy / count, mean_dy_xh = sum_dy_xh / count;
      for (int n = 0; n < batch; ++n) {
        std::size_t base = (static_cast<std::size_t>(n) * channels_ + c) * spatial;
        for (int s = 0; s < spatial; ++s)
          in_grad[base + s] = static_cast<Real>(
              scale * (out_grad[base + s] - mean_dy - normed_[base + s] * mean_dy_xh));
      }
    }
    return in_grad;
  }

  std::vector<Param<Real> *> Params() override {
    return {&gamma_, &beta_, &running_mean_, &running_var_};
  }

  void Initialize(Rng &) override {
    gamma_.value.Fill(1);
    beta_.value.Fill(0);
    running_mean_.value.Fill(0);
    running_var_.value.Fill(1);
  }

 private:
  std::pair<int, int> Dims(const Tensor<Real> &in) const {
    Require((in.rank() == 2 || in.rank() == 4) && in.dim(1) == channels_,
            "batchnorm: expected " + std::to_string(channels_) + " channels, got " +
                ShapeString(in.shape()));
    int spatial = in.rank() == 4 ? in.dim(2) * in.dim(3) : 1;
    return {in.dim(0), spatial};
  }

  int channels_;
  Param<Real> gamma_, beta_, running_mean_, running_var_;
  Tensor<Real> normed_;
  std::vector<double> inv_std_;
};

// ---------------------------------------------------------- convolution

// Cross-correlation with a k x k kernel (k in {1, 3}), padding k/2, no bias.
template <typename Real>
class ConvLayer : public Layer<Real> {
 public:
  ConvLayer(int kernel, int in, int out, int stride)
      : k_(kernel), pad_(kernel / 2), in_(in), out_(out), stride_(stride) {
    Require(kernel == 1 || kernel == 3, "conv: kernel must be 1 or 3");
    Require(stride == 1 || stride == 2, "conv: stride must be 1 or 2");
    weight_ = {"weight", Tensor<Real>({out, in, k_, k_}), Tensor<Real>({out, in, k_, k_})};
  }

  LayerSpec spec() const override {
    return k_ == 3 ? LayerSpec::Conv3x3(in_, out_, stride_)
                   : LayerSpec::Conv1x1(in_, out_, stride_);
  }

  int OutSize(int n) const { return (n + 2 * pad_ - k_) / stride_ + 1; }

  Tensor<Real> Infer(const Tensor<Real> &in) const override {
    Require(in.rank() == 4 && in.dim(1) == in_,
            "conv: channel mismatch, expected " + std::to_string(in_) + " got " +
                ShapeString(in.shape()));
    const int batch = in.dim(0), h = in.dim(2), w = in.dim(3);
    const int ho = OutSize(h), wo = OutSize(w);
    const int patch = in_ * k_ * k_;
    Tensor<Real> out({batch, out_, ho, wo});
    typename Tensor<Real>::Storage cols(static_cast<std::size_t>(patch) * ho * wo);
    ConstMatMap<Real> kern(weight_.value.data(), out_, patch);
    for (int n = 0; n < batch; ++n) {
      Im2Col(in.data() + static_cast<std::size_t>(n) * in_ * h * w, h, w, ho, wo,
             cols.data());
      MatMap<Real>(out.data() + static_cast<std::size_t>(n) * out_ * ho * wo, out_,
                   ho * wo)
          .noalias() = kern * ConstMatMap<Real>(cols.data(), patch, ho * wo);
    }
    return out;
  }

  Tensor<Real> Forward(const Tensor<Real> &in, Rng &) override {
    input_ = in;
    return Infer(in);
  }

  Tensor<Real> Backward(const Tensor<Real> &out_grad) override {
    const int batch = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
    const int ho = OutSize(h), wo = OutSize(w);
    const int patch = in_ * k_ * k_;
    Require(out_grad.rank() == 4 && out_grad.dim(1) == out_ && out_grad.dim(2) == ho &&
                out_grad.dim(3) == wo,
            "conv: gradient shape mismatch");
    Tensor<Real> in_grad(input_.shape());
    typename Tensor<Real>::Storage cols(static_cast<std::size_t>(patch) * ho * wo);
    typename Tensor<Real>::Storage dcols(cols.size());
    ConstMatMap<Real> kern(weight_.value.data(), out_, patch);
    MatMap<Real> dkern(weight_.grad.data(), out_, patch);
    for (int n = 0; n < batch; ++n) {
      Im2Col(input_.data() + static_cast<std::size_t>(n) * in_ * h * w, h, w, ho, wo,
             cols.data());
      ConstMatMap<Real> dy(out_grad.data() + static_cast<std::size_t>(n) * out_ * ho * wo,
                           out_, ho * wo);
      dkern.noalias() += dy * ConstMatMap<Real>(cols.data(), patch, ho * wo).transpose();
      MatMap<Real>(dcols.data(), patch, ho * wo).noalias() = kern.transpose() * dy;
      Col2Im(dcols.data(), h, w, ho, wo,
             in_grad.data() + static_cast<std::size_t>(n) * in_ * h * w);
    }
    return in_grad;
  }

  std::vector<Param<Real> *> Params() override { return {&weight_}; }

  void Initialize(Rng &rng) override { UniformFanIn(&weight_.value, in_ * k_ * k_, rng); }

 private:
  // cols[(c*k + ky)*k + kx][oy*wo + ox] = x[c][oy*s + ky - p][ox*s + kx - p]
  void Im2Col(const Real *x, int h, int w, int ho, int wo, Real *cols) const {
    std::size_t row = 0;
    for (int c = 0; c < in_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx, ++row) {
          Real *dst = cols + row * ho * wo;
          for (int oy = 0; oy < ho; ++oy) {
            int iy = oy * stride_ + ky - pad_;
            for (int ox = 0; ox < wo; ++ox) {
              int ix = ox * stride_ + kx - pad_;
              dst[oy * wo + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                      ? x[(static_cast<std::size_t>(c) * h + iy) * w + ix]
                                      : Real(0);
            }
          }
        }
  }

  void Col2Im(const Real *cols, int h, int w, int ho, int wo, Real *dx) const {
    std::size_t row = 0;
    for (int c = 0; c < in_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx, ++row) {
          const Real *src = cols + row * ho * wo;
          for (int oy = 0; oy < ho; ++oy) {
            int iy = oy * stride_ + ky - pad_;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < wo; ++ox) {
              int ix = ox * stride_ + kx - pad_;
              if (ix >= 0 && ix < w)
                dx[(static_cast<std::size_t>(c) * h + iy) * w + ix] += src[oy * wo + ox];
            }
          }
        }
  }

  int k_, pad_, in_, out_, stride_;
  Param<Real> weight_;
  Tensor<Real> input_;
};

// ------------------------------------------------- elementwise / pooling

template <typename Real>
class ReluLayer : public Layer<Real> {
 public:
  LayerSpec spec() const override { return LayerSpec::Relu(); }
  Tensor<Real> Infer(const Tensor<Real> &in) const override { return Relu(in); }
  Tensor<Real> Forward(const Tensor<Real> &in, Rng &) override {
    output_ = Relu(in);
    return output_;
  }
  Tensor<Real> Backward(const Tensor<Real> &out_grad) override {
    Tensor<Real> in_grad(out_grad.shape());
    for (std::size_t i = 0; i < in_grad.size(); ++i)
      in_grad[i] = output_[i] > 0 ? out_grad[i] : Real(0);
    return in_grad;
  }

 private:
  Tensor<Real> output_;
};

// Inverted dropout: kept units are scaled by 1/(1-rate) at training time.
template <typename Real>
class DropoutLayer : public Layer<Real> {
 public:
  explicit DropoutLayer(float rate) : rate_(rate) {
    Require(rate >= 0.0f && rate < 1.0f, "dropout: rate must be in [0, 1)");
  }
  LayerSpec spec() const override { return LayerSpec::Dropout(rate_); }
  Tensor<Real> Infer(const Tensor<Real> &in) const override { return in; }
  Tensor<Real> Forward(const Tensor<Real> &in, Rng &rng) override {
    const Real scale = Real(1) / (Real(1) - static_cast<Real>(rate_));
    mask_ = Tensor<Real>(in.shape());
    Tensor<Real> out(in.shape());
    for (std::size_t i = 0; i < in.size(); ++i) {
      mask_[i] = (rate_ > 0.0f && rng.Uniform() < rate_) ? Real(0) : scale;
      out[i] = in[i] * mask_[i];
    }
    return out;
  }
  Tensor<Real> Backward(const Tensor<Real> &out_grad) override {
    Tensor<Real> in_grad(out_grad.shape());
    for (std::size_t i = 0; i < in_grad.size(); ++i) in_grad[i] = out_grad[i] * mask_[i];
    return in_grad;
  }

 private:
  float rate_;
  Tensor<Real> mask_;
};

template <typename Real>
class GlobalAvgPoolLayer : public Layer<Real> {
 public:
  LayerSpec spec() const override { return LayerSpec::GlobalAvgPool(); }
  Tensor<Real> Infer(const Tensor<Real> &in) const override {
    Require(in.rank() == 4, "global_avg_pool: expected 4-D input");
    const int batch = in.dim(0), ch = in.dim(1), spatial = in.dim(2) * in.dim(3);
    Tensor<Real> out({batch, ch});
    for (int i = 0; i < batch * ch; ++i) {
      double s = 0;
      for (int k = 0; k < spatial; ++k) s += in[static_cast<std::size_t>(i) * spatial + k];
      out[i] = static_cast<Real>(s / spatial);
    }
    return out;
  }
  Tensor<Real> Forward(const Tensor<Real> &in, Rng &) override {
    in_shape_ = in.shape();
    return Infer(in);
  }
  Tensor<Real> Backward(const Tensor<Real> &out_grad) override {
    const int spatial = in_shape_[2] * in_shape_[3];
    Tensor<Real> in_grad(in_shape_);
    for (std::size_t i = 0; i < out_grad.size(); ++i)
      for (int k = 0; k < spatial; ++k)
        in_grad[i * spatial + k] = out_grad[i] / static_cast<Real>(spatial);
    return in_grad;
  }

 private:
  std::vector<int> in_shape_;
};

// ------------------------------------------------------- residual block

// y = relu(f(x) + shortcut(x)), f = bn(conv3x3(relu(bn(conv3x3(x))))).
// The shortcut is the identity unless channels or stride change, in which
// case it is bn(conv1x1(x)). The second conv starts at zero so the block
// initially passes relu(shortcut(x)).
template <typename Real>
class ResidualLayer : public Layer<Real> {
 public:
  ResidualLayer(int in, int out, int stride) : in_(in), out_(out), stride_(stride) {
    conv1_ = std::make_unique<ConvLayer<Real>>(3, in, out, stride);
    bn1_ = std::make_unique<BatchNormLayer<Real>>(out);
    conv2_ = std::make_unique<ConvLayer<Real>>(3, out, out, 1);
    bn2_ = std::make_unique<BatchNormLayer<Real>>(out);
    if (HasProjection()) {
      proj_ = std::make_unique<ConvLayer<Real>>(1, in, out, stride);
      proj_bn_ = std::make_unique<BatchNormLayer<Real>>(out);
    }
  }

  bool HasProjection() const { return in_ != out_ || stride_ != 1; }

  LayerSpec spec() const override { return LayerSpec::Residual(in_, out_, stride_); }

  Tensor<Real> Infer(const Tensor<Real> &in) const override {
    Tensor<Real> f = bn2_->Infer(conv2_->Infer(Relu(bn1_->Infer(conv1_->Infer(in)))));
    Tensor<Real> s = HasProjection() ? proj_bn_->Infer(proj_->Infer(in)) : in;
    return Relu(Add(f, s));
  }

  Tensor<Real> Forward(const Tensor<Real> &in, Rng &rng) override {
    Tensor<Real> a = bn1_->Forward(conv1_->Forward(in, rng), rng);
    a = relu1_.Forward(a, rng);
    Tensor<Real> f = bn2_->Forward(conv2_->Forward(a, rng), rng);
    Tensor<Real> s = HasProjection() ? proj_bn_->Forward(proj_->Forward(in, rng), rng) : in;
    return relu_out_.Forward(Add(f, s), rng);
  }

  Tensor<Real> Backward(const Tensor<Real> &out_grad) override {
    Tensor<Real> dz = relu_out_.Backward(out_grad);
    Tensor<Real> dx = conv1_->Backward(
        bn1_->Backward(relu1_.Backward(conv2_->Backward(bn2_->Backward(dz)))));
    Tensor<Real> ds = HasProjection() ? proj_->Backward(proj_bn_->Backward(dz)) : dz;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += ds[i];
    return dx;
  }

  std::vector<Param<Real> *> Params() override {
    std::vector<Param<Real> *> out;
    for (Layer<Real> *l : Children())
      for (Param<Real> *p : l->Params()) out.push_back(p);
    return out;
  }

  void Initialize(Rng &rng) override {
    for (Layer<Real> *l : Children()) l->Initialize(rng);
    for (Param<Real> *p : conv2_->Params()) p->value.Fill(0);
  }

 private:
  std::vector<Layer<Real> *> Children() {
    std::vector<Layer<Real> *> c = {conv1_.get(), bn1_.get(), conv2_.get(), bn2_.get()};
    if (HasProjection()) {
      c.push_back(proj_.get());
      c.push_back(proj_bn_.get());
    }
    return c;
  }

  static Tensor<Real> Add(const Tensor<Real> &a, const Tensor<Real> &b) {
    Require(a.shape() == b.shape(), "residual: branch shapes differ " +
                                        ShapeString(a.shape()) + " vs " +
                                        ShapeString(b.shape()));
    Tensor<Real> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
  }

  int in_, out_, stride_;
  std::unique_ptr<Layer<Real>> conv1_, bn1_, conv2_, bn2_, proj_, proj_bn_;
  ReluLayer<Real> relu1_, relu_out_;
};

}  // namespace

const char *LayerKindName(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kLayerNorm: return "layernorm";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kConv3x3: return "conv3x3";
    case LayerKind::kConv1x1: return "conv1x1";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kGlobalAvgPool: return "global_avg_pool";
    case LayerKind::kResidual: return "residual";
  }
  return "unknown";
}

std::string LayerSpec::ToString() const {
  std::ostringstream os;
  os << LayerKindName(kind);
  switch (kind) {
    case LayerKind::kDense: os << "(" << in << "->" << out << ")"; break;
    case LayerKind::kLayerNorm:
    case LayerKind::kBatchNorm: os << "(" << in << ")"; break;
    case LayerKind::kConv3x3:
    case LayerKind::kConv1x1:
    case LayerKind::kResidual:
      os << "(" << in << "->" << out << ", stride " << stride << ")";
      break;
    case LayerKind::kDropout: os << "(" << rate << ")"; break;
    default: break;
  }
  return os.str();
}

template <typename Real>
std::vector<const Param<Real> *> Layer<Real>::Params() const {
  std::vector<const Param<Real> *> out;
  for (Param<Real> *p : const_cast<Layer<Real> *>(this)->Params()) out.push_back(p);
  return out;
}

template <typename Real>
std::size_t Layer<Real>::NumTrainable() const {
  std::size_t n = 0;
  for (const Param<Real> *p : Params())
    if (p->trainable) n += p->value.size();
  return n;
}

template <typename Real>
void Layer<Real>::ZeroGrad() {
  for (Param<Real> *p : Params()) p->grad.Fill(0);
}

template <typename Real>
Tensor<Real> Relu(const Tensor<Real> &x) {
  Tensor<Real> y = x;
  for (auto &v : y.vec()) v = v > 0 ? v : Real(0);
  return y;
}

template <typename Real>
std::unique_ptr<Layer<Real>> MakeLayer(const LayerSpec &spec) {
  switch (spec.kind) {
    case LayerKind::kDense: return std::make_unique<DenseLayer<Real>>(spec.in, spec.out);
    case LayerKind::kLayerNorm: return std::make_unique<LayerNormLayer<Real>>(spec.in);
    case LayerKind::kBatchNorm: return std::make_unique<BatchNormLayer<Real>>(spec.in);
    case LayerKind::kConv3x3:
      return std::make_unique<ConvLayer<Real>>(3, spec.in, spec.out, spec.stride);
    case LayerKind::kConv1x1:
      return std::make_unique<ConvLayer<Real>>(1, spec.in, spec.out, spec.stride);
    case LayerKind::kRelu: return std::make_unique<ReluLayer<Real>>();
    case LayerKind::kDropout: return std::make_unique<DropoutLayer<Real>>(spec.rate);
    case LayerKind::kGlobalAvgPool: return std::make_unique<GlobalAvgPoolLayer<Real>>();
    case LayerKind::kResidual:
      return std::make_unique<ResidualLayer<Real>>(spec.in, spec.out, spec.stride);
  }
  throw DataError("unknown layer kind " + std::to_string(static_cast<int>(spec.kind)));
}

template class Layer<float>;
template class Layer<double>;
template std::unique_ptr<Layer<float>> MakeLayer<float>(const LayerSpec &);
template std::unique_ptr<Layer<double>> MakeLayer<double>(const LayerSpec &);
template Tensor<float> Relu(const Tensor<float> &);
template Tensor<double> Relu(const Tensor<double> &);

}  // namespace qbe
