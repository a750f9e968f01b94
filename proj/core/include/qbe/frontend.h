// core/include/qbe/frontend.h

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

#ifndef QBE_FRONTEND_H_
#define QBE_FRONTEND_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qbe/feature-matrix.h"

namespace qbe {

struct MfccOptions {
  int window_ms = 25;
  int hop_ms = 10;
  double preemph = 0.97;
  int num_mel_bins = 23;
  int num_ceps = 13;  // c0 included
  double low_freq = 20.0;
  double log_floor = 1e-10;
};

// 13 cepstra per 10 ms hop from 16-bit mono PCM at 8 or 16 kHz.
// Throws DataError("input too short") when fewer samples than one window.
FeatureMatrix ComputeMfcc(std::span<const int16_t> pcm, int sample_rate,
                          const MfccOptions &opts = {},
                          const std::string &utt_id = "");

struct WavData {
  int sample_rate = 0;
  std::vector<int16_t> samples;
};

// Minimal RIFF/WAVE reader: PCM, 16 bit, mono only.
WavData ReadWav(const std::string &path);

// Appends delta and delta-delta columns computed by regression over
// +/- window frames with edge replication. Output dims = 3 * input dims.
FeatureMatrix AddDeltas(const FeatureMatrix &feats, int window = 2);

struct FrameContextConfig {
  int left = 6;
  int right = 6;
  int base_dims = 39;

  int StackedDims() const { return base_dims * (left + right + 1); }
};

// Stacks [t-left, ..., t, ..., t+right] into one row per frame, replicating
// the first/last frame at the edges.
FeatureMatrix StackContext(const FeatureMatrix &feats,
                           const FrameContextConfig &cfg);

// Single-channel [base_dims x (left+right+1)] image centred on one frame.
// Column c holds frame (center - left + c).
struct FeatureImage {
  std::string utterance_id;
  int center_frame = 0;
  int rows = 0;
  int cols = 0;
  std::vector<float> data;  // rows x cols, row-major

  float operator()(int r, int c) const { return data[r * cols + c]; }
};

std::vector<FeatureImage> ExtractImages(const FeatureMatrix &feats, int left,
                                        int right);

// Writes the image of frame t into out[dims * (left+right+1)], row-major,
// so batch assembly avoids materialising whole-utterance image lists.
void FillImage(const FeatureMatrix &feats, int t, int left, int right,
               std::span<float> out);

// Writes the stacked context vector of frame t into out.
void FillStacked(const FeatureMatrix &feats, int t, int left, int right,
                 std::span<float> out);

// Per-dimension mean/variance normalisation. Statistics come from the
// training split only and are then applied everywhere.
class Cmvn {
 public:
  Cmvn() = default;
  static Cmvn Estimate(const std::vector<FeatureMatrix> &feats);

  FeatureMatrix Apply(const FeatureMatrix &feats) const;
  std::size_t dims() const { return mean_.size(); }
  const std::vector<double> &mean() const { return mean_; }
  const std::vector<double> &stddev() const { return stddev_; }

  void Write(const std::string &path) const;
  static Cmvn Read(const std::string &path);

 private:
  std::vector<double> mean_, stddev_;
};

}  // namespace qbe

#endif  // QBE_FRONTEND_H_
