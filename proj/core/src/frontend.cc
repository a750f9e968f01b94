// core/src/frontend.cc

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

#include "qbe/frontend.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <sstream>

#include "qbe/errors.h"

namespace qbe {

namespace {

double MelScale(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }

// fftw planning is not thread-safe; execution is.
std::mutex &FftwPlannerMutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    std::lock_guard<std::mutex> lock(FftwPlannerMutex());
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard<std::mutex> lock(FftwPlannerMutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft &) = delete;
  RealFft &operator=(const RealFft &) = delete;

  double *input() { return in_; }

  // Power spectrum |X_k|^2 for k = 0..n/2.
  void PowerSpectrum(std::vector<double> *power) {
    fftw_execute(plan_);
    power->resize(n_ / 2 + 1);
    for (int k = 0; k <= n_ / 2; ++k)
      (*power)[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
  }

 private:
  int n_;
  double *in_ = nullptr;
  fftw_complex *out_ = nullptr;
  fftw_plan plan_;
};

// Triangular filters over the FFT bins, equally spaced on the mel scale.
std::vector<std::vector<double>> MelBanks(int num_bins, int fft_size,
                                          int sample_rate, double low_freq) {
  const double nyquist = 0.5 * sample_rate;
  const double mel_low = MelScale(low_freq), mel_high = MelScale(nyquist);
  const double mel_delta = (mel_high - mel_low) / (num_bins + 1);
  const int num_fft_bins = fft_size / 2 + 1;
  std::vector<std::vector<double>> banks(num_bins,
                                         std::vector<double>(num_fft_bins, 0.0));
  for (int b = 0; b < num_bins; ++b) {
    double left = mel_low + b * mel_delta, center = left + mel_delta,
           right = center + mel_delta;
    for (int k = 0; k < num_fft_bins; ++k) {
      double mel = MelScale(static_cast<double>(k) * sample_rate / fft_size);
      if (mel > left && mel < right) {
        banks[b][k] = mel <= center ? (mel - left) / (center - left)
                                    : (right - mel) / (right - center);
      }
    }
  }
  return banks;
}

int ClampIndex(long t, std::size_t frames) {
  return static_cast<int>(std::clamp<long>(t, 0, static_cast<long>(frames) - 1));
}

}  // namespace

FeatureMatrix ComputeMfcc(std::span<const int16_t> pcm, int sample_rate,
                          const MfccOptions &opts, const std::string &utt_id) {
  if (sample_rate != 8000 && sample_rate != 16000)
    throw DataError("unsupported sample rate " + std::to_string(sample_rate));
  const int window = sample_rate * opts.window_ms / 1000;
  const int hop = sample_rate * opts.hop_ms / 1000;
  if (pcm.size() < static_cast<std::size_t>(window))
    throw DataError("input too short");
  const std::size_t frames = 1 + (pcm.size() - window) / hop;

  int fft_size = 1;
  while (fft_size < window) fft_size <<= 1;

  std::vector<double> hamming(window);
  for (int n = 0; n < window; ++n)
    hamming[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (window - 1));
  const auto banks = MelBanks(opts.num_mel_bins, fft_size, sample_rate, opts.low_freq);

  // Orthonormal DCT-II.
  const int nb = opts.num_mel_bins;
  std::vector<double> dct(static_cast<std::size_t>(opts.num_ceps) * nb);
  for (int k = 0; k < opts.num_ceps; ++k) {
    double scale = k == 0 ? std::sqrt(1.0 / nb) : std::sqrt(2.0 / nb);
    for (int n = 0; n < nb; ++n)
      dct[k * nb + n] = scale * std::cos(std::numbers::pi * k * (n + 0.5) / nb);
  }

  RealFft fft(fft_size);
  std::vector<double> frame(window), power, log_mel(nb);
  FeatureMatrix out(utt_id, frames, opts.num_ceps);
  for (std::size_t t = 0; t < frames; ++t) {
    const int16_t *src = pcm.data() + t * hop;
    for (int n = 0; n < window; ++n) frame[n] = src[n];
    for (int n = window - 1; n > 0; --n) frame[n] -= opts.preemph * frame[n - 1];
    frame[0] -= opts.preemph * frame[0];

    double *in = fft.input();
    for (int n = 0; n < window; ++n) in[n] = frame[n] * hamming[n];
    std::fill(in + window, in + fft_size, 0.0);
    fft.PowerSpectrum(&power);

    for (int b = 0; b < nb; ++b) {
      double e = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) e += banks[b][k] * power[k];
      log_mel[b] = std::log(std::max(e, opts.log_floor));
    }
    for (int k = 0; k < opts.num_ceps; ++k) {
      double c = 0.0;
      for (int n = 0; n < nb; ++n) c += dct[k * nb + n] * log_mel[n];
      out(t, k) = static_cast<float>(c);
    }
  }
  return out;
}

WavData ReadWav(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                          std::istreambuf_iterator<char>());
  auto u32 = [&](std::size_t off) {
    if (off + 4 > bytes.size()) throw DataError(path + ": truncated wav");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[off + i])) << (8 * i);
    return v;
  };
  auto u16 = [&](std::size_t off) {
    if (off + 2 > bytes.size()) throw DataError(path + ": truncated wav");
    return static_cast<uint16_t>(static_cast<unsigned char>(bytes[off]) |
                                 (static_cast<unsigned char>(bytes[off + 1]) << 8));
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError(path + ": not a RIFF/WAVE file");

  WavData wav;
  bool have_fmt = false;
  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    std::string id(bytes.data() + off, 4);
    uint32_t size = u32(off + 4);
    std::size_t body = off + 8;
    if (id == "fmt ") {
      uint16_t format = u16(body), channels = u16(body + 2), bits = u16(body + 14);
      wav.sample_rate = static_cast<int>(u32(body + 4));
      if (format != 1 || channels != 1 || bits != 16)
        throw DataError(path + ": only 16-bit mono PCM is supported");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError(path + ": data chunk before fmt chunk");
      std::size_t n = std::min<std::size_t>(size, bytes.size() - body) / 2;
      wav.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i)
        wav.samples[i] = static_cast<int16_t>(u16(body + 2 * i));
      return wav;
    }
    off = body + size + (size & 1);
  }
  throw DataError(path + ": no data chunk");
}

FeatureMatrix AddDeltas(const FeatureMatrix &feats, int window) {
  if (window < 1) throw DataError("delta window must be >= 1");
  const std::size_t frames = feats.frames(), dims = feats.dims();
  double denom = 0.0;
  for (int d = 1; d <= window; ++d) denom += 2.0 * d * d;

  auto regress = [&](const std::vector<double> &src, std::vector<double> *dst) {
    dst->assign(frames * dims, 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
      for (int d = 1; d <= window; ++d) {
        std::size_t fwd = ClampIndex(static_cast<long>(t) + d, frames);
        std::size_t bwd = ClampIndex(static_cast<long>(t) - d, frames);
        for (std::size_t k = 0; k < dims; ++k)
          (*dst)[t * dims + k] += d * (src[fwd * dims + k] - src[bwd * dims + k]);
      }
      for (std::size_t k = 0; k < dims; ++k) (*dst)[t * dims + k] /= denom;
    }
  };
  std::vector<double> stat(feats.data().begin(), feats.data().end()), delta, accel;
  regress(stat, &delta);
  regress(delta, &accel);

  FeatureMatrix out(feats.id(), frames, 3 * dims);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < dims; ++k) {
      out(t, k) = feats(t, k);
      out(t, dims + k) = static_cast<float>(delta[t * dims + k]);
      out(t, 2 * dims + k) = static_cast<float>(accel[t * dims + k]);
    }
  }
  return out;
}

void FillStacked(const FeatureMatrix &feats, int t, int left, int right,
                 std::span<float> out) {
  const std::size_t dims = feats.dims();
  std::size_t pos = 0;
  for (int c = -left; c <= right; ++c) {
    auto row = feats.Row(ClampIndex(static_cast<long>(t) + c, feats.frames()));
    std::copy(row.begin(), row.end(), out.begin() + pos);
    pos += dims;
  }
}

void FillImage(const FeatureMatrix &feats, int t, int left, int right,
               std::span<float> out) {
  const int cols = left + right + 1;
  const std::size_t dims = feats.dims();
  for (int c = 0; c < cols; ++c) {
    auto row = feats.Row(ClampIndex(static_cast<long>(t) - left + c, feats.frames()));
    for (std::size_t r = 0; r < dims; ++r) out[r * cols + c] = row[r];
  }
}

FeatureMatrix StackContext(const FeatureMatrix &feats,
                           const FrameContextConfig &cfg) {
  if (static_cast<int>(feats.dims()) != cfg.base_dims)
    throw DataError("StackContext: '" + feats.id() + "' has " +
                    std::to_string(feats.dims()) + " dims, expected " +
                    std::to_string(cfg.base_dims));
  FeatureMatrix out(feats.id(), feats.frames(), cfg.StackedDims());
  for (std::size_t t = 0; t < feats.frames(); ++t)
    FillStacked(feats, static_cast<int>(t), cfg.left, cfg.right, out.Row(t));
  return out;
}

std::vector<FeatureImage> ExtractImages(const FeatureMatrix &feats, int left,
                                        int right) {
  std::vector<FeatureImage> images;
  images.reserve(feats.frames());
  const int cols = left + right + 1;
  for (std::size_t t = 0; t < feats.frames(); ++t) {
    FeatureImage img;
    img.utterance_id = feats.id();
    img.center_frame = static_cast<int>(t);
    img.rows = static_cast<int>(feats.dims());
    img.cols = cols;
    img.data.resize(static_cast<std::size_t>(img.rows) * cols);
    FillImage(feats, static_cast<int>(t), left, right, img.data);
    images.push_back(std::move(img));
  }
  return images;
}

Cmvn Cmvn::Estimate(const std::vector<FeatureMatrix> &feats) {
  if (feats.empty()) throw DataError("Cmvn::Estimate: no training features");
  const std::size_t dims = feats.front().dims();
  std::vector<double> sum(dims, 0.0), sumsq(dims, 0.0);
  std::size_t count = 0;
  for (const auto &f : feats) {
    if (f.dims() != dims) throw DataError("Cmvn::Estimate: dimension mismatch");
    for (std::size_t t = 0; t < f.frames(); ++t)
      for (std::size_t k = 0; k < dims; ++k) {
        sum[k] += f(t, k);
        sumsq[k] += static_cast<double>(f(t, k)) * f(t, k);
      }
    count += f.frames();
  }
  if (count == 0) throw DataError("Cmvn::Estimate: zero frames");
  Cmvn c;
  c.mean_.resize(dims);
  c.stddev_.resize(dims);
  for (std::size_t k = 0; k < dims; ++k) {
    c.mean_[k] = sum[k] / count;
    double var = sumsq[k] / count - c.mean_[k] * c.mean_[k];
    c.stddev_[k] = std::sqrt(std::max(var, 1e-10));
  }
  return c;
}

FeatureMatrix Cmvn::Apply(const FeatureMatrix &feats) const {
  if (feats.dims() != mean_.size())
    throw DataError("Cmvn::Apply: '" + feats.id() + "' dimension mismatch");
  FeatureMatrix out = feats;
  for (std::size_t t = 0; t < out.frames(); ++t)
    for (std::size_t k = 0; k < out.dims(); ++k)
      out(t, k) = static_cast<float>((feats(t, k) - mean_[k]) / stddev_[k]);
  return out;
}

void Cmvn::Write(const std::string &path) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << std::setprecision(17) << mean_.size() << "\n";
  for (std::size_t k = 0; k < mean_.size(); ++k)
    os << mean_[k] << " " << stddev_[k] << "\n";
}

Cmvn Cmvn::Read(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  std::size_t dims = 0;
  if (!(is >> dims)) throw DataError(path + ": bad cmvn header");
  Cmvn c;
  c.mean_.resize(dims);
  c.stddev_.resize(dims);
  for (std::size_t k = 0; k < dims; ++k)
    if (!(is >> c.mean_[k] >> c.stddev_[k])) throw DataError(path + ": truncated cmvn");
  return c;
}

}  // namespace qbe
