// core/include/qbe/model.h

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

#ifndef QBE_MODEL_H_
#define QBE_MODEL_H_

#include <memory>
#include <string>
#include <vector>

#include "qbe/feature-matrix.h"
#include "qbe/frontend.h"
#include "qbe/nn-layers.h"

namespace qbe {

enum class Architecture { kFfn = 0, kResnet = 1 };

const char *ArchitectureName(Architecture arch);
Architecture ParseArchitecture(const std::string &name);

// How a per-frame network input is built from a normalised feature matrix:
// a stacked context vector (FFN) or a single-channel image (ResNet).
struct InputSpec {
  enum class Kind { kStacked = 0, kImage = 1 };
  Kind kind = Kind::kStacked;
  int left = 6;
  int right = 6;
  int base_dims = 39;

  int Width() const { return left + right + 1; }
  int FlatSize() const { return base_dims * Width(); }
  // Input tensor shape for `batch` frames.
  std::vector<int> Shape(int batch) const;
  friend bool operator==(const InputSpec &, const InputSpec &) = default;
};

struct LanguageSpec {
  std::string id;
  int num_classes = 0;
};

// Monophone class counts of the five GlobalPhone training languages
// (FR, GE, PT, ES, RU). Throws ConfigError for any other code.
int GlobalPhoneClassCount(const std::string &language);
std::vector<LanguageSpec> GlobalPhoneLanguages(const std::vector<std::string> &codes);

struct FfnConfig {
  int hidden_units = 1024;
  int bottleneck_units = 32;
  // Hidden layers before the bottleneck; 0 picks 3 / 4 / 5 for one, up to
  // three, and more languages.
  int hidden_layers = 0;
  float dropout = 0.1f;
  FrameContextConfig context{6, 6, 39};
};

struct ResnetConfig {
  int stem_channels = 16;
  // One stage per entry; stride 2 from the second stage on. The last stage
  // must have 256 channels (the pooled vector size).
  std::vector<int> stage_channels{16, 32, 64, 128, 256};
  int blocks_per_stage = 1;
  int bottleneck_units = 32;
  int post_bottleneck_units = 256;
  float dropout = 0.05f;
  int context = 12;
  int base_dims = 39;
};

struct LanguageTaskHead {
  std::string language_id;
  int num_classes = 0;
  std::unique_ptr<Layer<float>> dense;
};

struct ParamItem {
  std::string name;
  std::size_t count = 0;
};

struct ParamCount {
  std::vector<ParamItem> items;
  std::size_t total = 0;
};

// One sample per row of `inputs`; `head_of_sample[i]` indexes Model::heads.
struct TrainBatch {
  Tensor<float> inputs;
  std::vector<int> labels;
  std::vector<int> head_of_sample;
};

struct BatchLoss {
  double loss = 0.0;  // mean over the batch
  std::size_t correct = 0;
};

// Shared trunk (everything up to and including the last shared layer) plus
// one dense output head per training language. The layer at
// bottleneck_index is the linear 32-unit bottleneck; its output is the
// extracted feature.
class Model {
 public:
  Model() = default;
  Model(Model &&) = default;
  Model &operator=(Model &&) = default;

  Architecture architecture() const { return architecture_; }
  const InputSpec &input_spec() const { return input_; }
  int bottleneck_index() const { return bottleneck_index_; }
  int bottleneck_dims() const;
  const std::vector<std::unique_ptr<Layer<float>>> &trunk() const { return trunk_; }
  const std::vector<LanguageTaskHead> &heads() const { return heads_; }
  int HeadIndex(const std::string &language) const;  // -1 if absent

  // Builds the input tensor for the given frames of one utterance.
  Tensor<float> BuildInput(const FeatureMatrix &feats, std::size_t begin,
                           std::size_t end) const;

  // Inference-mode pass through the trunk up to the bottleneck output.
  Tensor<float> InferBottleneck(const Tensor<float> &inputs) const;
  // Inference-mode logits of one head.
  Tensor<float> InferLogits(const Tensor<float> &inputs, int head) const;

  // Bottleneck features, one 32-dim row per input frame. Heads are unused.
  FeatureMatrix ExtractBottleneck(const FeatureMatrix &feats) const;

  // Training-mode forward/backward for one batch. Each sample's loss is
  // taken at its own head only, scaled by 1/batch; parameter gradients are
  // zeroed first and left in Param::grad.
  BatchLoss ComputeGradients(const TrainBatch &batch, Rng &rng);

  std::vector<Param<float> *> Params();
  std::vector<Param<float> *> TrunkParams();
  std::vector<Param<float> *> HeadParams(int head);

  ParamCount CountParams() const;

  void DropHeads() { heads_.clear(); }

  // Checkpoint: "QBEM" | u32 version | header | layer specs | parameter
  // tensors in declaration order (u32 rank, u32 dims, f32 little-endian).
  void Save(const std::string &path) const;
  static Model Load(const std::string &path);
  void WriteManifest(const std::string &path) const;

  friend Model BuildFfn(const std::vector<LanguageSpec> &, const FfnConfig &, uint64_t);
  friend Model BuildResnet(const std::vector<LanguageSpec> &, const ResnetConfig &,
                           uint64_t);

 private:
  Architecture architecture_ = Architecture::kFfn;
  InputSpec input_;
  std::vector<std::unique_ptr<Layer<float>>> trunk_;
  int bottleneck_index_ = -1;
  std::vector<LanguageTaskHead> heads_;
};

// Layer norm before every linear transform, ReLU (then dropout) after every
// linear transform except the bottleneck.
Model BuildFfn(const std::vector<LanguageSpec> &languages, const FfnConfig &cfg = {},
               uint64_t seed = 1);

// Stem 3x3 conv + batch norm + ReLU, residual stages (channels doubling
// with stride 2), global average pooling to 256, linear bottleneck, dense
// 256 + ReLU, heads.
Model BuildResnet(const std::vector<LanguageSpec> &languages,
                  const ResnetConfig &cfg = {}, uint64_t seed = 1);

}  // namespace qbe

#endif  // QBE_MODEL_H_
