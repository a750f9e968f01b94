// core/src/model.cc

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

#include "qbe/model.h"

#include <algorithm>
#include <fstream>
#include <map>

#include "binary-io.h"
#include "qbe/errors.h"
#include "qbe/nn-train.h"

namespace qbe {

namespace {

constexpr char kCheckpointMagic[4] = {'Q', 'B', 'E', 'M'};
constexpr uint32_t kCheckpointVersion = 1;

void WriteSpec(internal::LeWriter *w, const LayerSpec &s) {
  w->Put(static_cast<uint8_t>(s.kind));
  w->Put(static_cast<uint32_t>(s.in));
  w->Put(static_cast<uint32_t>(s.out));
  w->Put(static_cast<uint32_t>(s.stride));
  w->PutFloat(s.rate);
}

LayerSpec ReadSpec(internal::LeReader *r) {
  LayerSpec s;
  uint8_t kind = r->Get<uint8_t>("layer kind");
  if (kind > static_cast<uint8_t>(LayerKind::kResidual))
    throw ArchiveError(ArchiveError::Kind::kBadRecord,
                       r->path() + ": unknown layer kind " + std::to_string(kind));
  s.kind = static_cast<LayerKind>(kind);
  s.in = static_cast<int>(r->Get<uint32_t>("layer in"));
  s.out = static_cast<int>(r->Get<uint32_t>("layer out"));
  s.stride = static_cast<int>(r->Get<uint32_t>("layer stride"));
  s.rate = r->GetFloat("layer rate");
  return s;
}

void WriteParams(internal::LeWriter *w, Layer<float> &layer) {
  for (Param<float> *p : layer.Params()) {
    w->Put(static_cast<uint32_t>(p->value.rank()));
    for (int d : p->value.shape()) w->Put(static_cast<uint32_t>(d));
    for (float v : p->value.vec()) w->PutFloat(v);
  }
}

void ReadParams(internal::LeReader *r, Layer<float> *layer) {
  for (Param<float> *p : layer->Params()) {
    uint32_t rank = r->Get<uint32_t>("tensor rank");
    std::vector<int> shape(rank);
    for (auto &d : shape) d = static_cast<int>(r->Get<uint32_t>("tensor dim"));
    if (shape != p->value.shape())
      throw ArchiveError(ArchiveError::Kind::kBadRecord,
                         r->path() + ": tensor " + p->name + " has shape " +
                             ShapeString(shape) + ", expected " +
                             ShapeString(p->value.shape()));
    for (auto &v : p->value.vec()) v = r->GetFloat("tensor data");
  }
}

std::unique_ptr<Layer<float>> NewLayer(const LayerSpec &spec, Rng &rng) {
  auto layer = MakeLayer<float>(spec);
  layer->Initialize(rng);
  return layer;
}

void CheckLanguages(const std::vector<LanguageSpec> &languages) {
  if (languages.empty()) throw ConfigError("model needs at least one language");
  std::map<std::string, int> seen;
  for (const auto &l : languages) {
    if (l.num_classes < 2)
      throw ConfigError("language " + l.id + " needs at least 2 classes");
    if (seen[l.id]++) throw ConfigError("duplicate language " + l.id);
  }
}

}  // namespace

const char *ArchitectureName(Architecture arch) {
  return arch == Architecture::kFfn ? "ffn" : "resnet";
}

Architecture ParseArchitecture(const std::string &name) {
  if (name == "ffn") return Architecture::kFfn;
  if (name == "resnet") return Architecture::kResnet;
  throw ConfigError("unknown architecture '" + name + "' (expected ffn or resnet)");
}

std::vector<int> InputSpec::Shape(int batch) const {
  if (kind == Kind::kStacked) return {batch, FlatSize()};
  return {batch, 1, base_dims, Width()};
}

int GlobalPhoneClassCount(const std::string &language) {
  static const std::map<std::string, int> kCounts = {
      {"FR", 124}, {"GE", 133}, {"PT", 145}, {"ES", 130}, {"RU", 151}};
  auto it = kCounts.find(language);
  if (it == kCounts.end()) throw ConfigError("no class count for language " + language);
  return it->second;
}

std::vector<LanguageSpec> GlobalPhoneLanguages(const std::vector<std::string> &codes) {
  std::vector<LanguageSpec> out;
  for (const auto &c : codes) out.push_back({c, GlobalPhoneClassCount(c)});
  return out;
}

Model BuildFfn(const std::vector<LanguageSpec> &languages, const FfnConfig &cfg,
               uint64_t seed) {
  CheckLanguages(languages);
  if (languages.size() > 5) throw ConfigError("FFN builder supports 1 to 5 languages");
  const int num_langs = static_cast<int>(languages.size());
  int hidden_layers = cfg.hidden_layers;
  if (hidden_layers <= 0) hidden_layers = num_langs == 1 ? 3 : num_langs <= 3 ? 4 : 5;

  Rng rng(seed);
  Model m;
  m.architecture_ = Architecture::kFfn;
  m.input_ = {InputSpec::Kind::kStacked, cfg.context.left, cfg.context.right,
              cfg.context.base_dims};
  const int hidden = cfg.hidden_units;
  int in = cfg.context.StackedDims();
  for (int i = 0; i < hidden_layers; ++i) {
    m.trunk_.push_back(NewLayer(LayerSpec::LayerNorm(in), rng));
    m.trunk_.push_back(NewLayer(LayerSpec::Dense(in, hidden), rng));
    m.trunk_.push_back(NewLayer(LayerSpec::Relu(), rng));
    m.trunk_.push_back(NewLayer(LayerSpec::Dropout(cfg.dropout), rng));
    in = hidden;
  }
  m.trunk_.push_back(NewLayer(LayerSpec::LayerNorm(in), rng));
  m.trunk_.push_back(NewLayer(LayerSpec::Dense(in, cfg.bottleneck_units), rng));
  m.bottleneck_index_ = static_cast<int>(m.trunk_.size()) - 1;
  m.trunk_.push_back(NewLayer(LayerSpec::LayerNorm(cfg.bottleneck_units), rng));
  m.trunk_.push_back(NewLayer(LayerSpec::Dense(cfg.bottleneck_units, hidden), rng));
  m.trunk_.push_back(NewLayer(LayerSpec::Relu(), rng));
  m.trunk_.push_back(NewLayer(LayerSpec::Dropout(cfg.dropout), rng));
  m.trunk_.push_back(NewLayer(LayerSpec::LayerNorm(hidden), rng));
  for (const auto &l : languages)
    m.heads_.push_back({l.id, l.num_classes, NewLayer(LayerSpec::Dense(hidden, l.num_classes), rng)});
  return m;
}

Model BuildResnet(const std::vector<LanguageSpec> &languages, const ResnetConfig &cfg,
                  uint64_t seed) {
  CheckLanguages(languages);
  if (cfg.stage_channels.empty() || cfg.stage_channels.back() != 256)
    throw ConfigError("ResNet: the last stage must have 256 channels");
  if (cfg.blocks_per_stage < 1) throw ConfigError("ResNet: blocks_per_stage must be >= 1");

  Rng rng(seed);
  Model m;
  m.architecture_ = Architecture::kResnet;
  m.input_ = {InputSpec::Kind::kImage, cfg.context, cfg.context, cfg.base_dims};
  m.trunk_.push_back(NewLayer(LayerSpec::Conv3x3(1, cfg.stem_channels, 1), rng));
  m.trunk_.push_back(NewLayer(LayerSpec::BatchNorm(cfg.stem_channels), rng));
  m.trunk_.push_back(NewLayer(LayerSpec::Relu(), rng));
  int channels = cfg.stem_channels;
  for (std::size_t s = 0; s < cfg.stage_channels.size(); ++s) {
    for (int b = 0; b < cfg.blocks_per_stage; ++b) {
      int stride = (s > 0 && b == 0) ? 2 : 1;
      m.trunk_.push_back(
          NewLayer(LayerSpec::Residual(channels, cfg.stage_channels[s], stride), rng));
      m.trunk_.push_back(NewLayer(LayerSpec::Dropout(cfg.dropout), rng));
      channels = cfg.stage_channels[s];
    }
  }
  m.trunk_.push_back(NewLayer(LayerSpec::GlobalAvgPool(), rng));
  m.trunk_.push_back(NewLayer(LayerSpec::Dense(channels, cfg.bottleneck_units), rng));
  m.bottleneck_index_ = static_cast<int>(m.trunk_.size()) - 1;
  m.trunk_.push_back(
      NewLayer(LayerSpec::Dense(cfg.bottleneck_units, cfg.post_bottleneck_units), rng));
  m.trunk_.push_back(NewLayer(LayerSpec::Relu(), rng));
  for (const auto &l : languages)
    m.heads_.push_back({l.id, l.num_classes,
                        NewLayer(LayerSpec::Dense(cfg.post_bottleneck_units, l.num_classes), rng)});
  return m;
}

int Model::bottleneck_dims() const { return trunk_.at(bottleneck_index_)->spec().out; }

int Model::HeadIndex(const std::string &language) const {
  for (std::size_t i = 0; i < heads_.size(); ++i)
    if (heads_[i].language_id == language) return static_cast<int>(i);
  return -1;
}

Tensor<float> Model::BuildInput(const FeatureMatrix &feats, std::size_t begin,
                                std::size_t end) const {
  if (static_cast<int>(feats.dims()) != input_.base_dims)
    throw DataError("model input: '" + feats.id() + "' has " + std::to_string(feats.dims()) +
                    " dims, model expects " + std::to_string(input_.base_dims));
  const int n = static_cast<int>(end - begin);
  const std::size_t flat = input_.FlatSize();
  Tensor<float> x(input_.Shape(n));
  for (int i = 0; i < n; ++i) {
    std::span<float> dst(x.data() + i * flat, flat);
    const int t = static_cast<int>(begin) + i;
    if (input_.kind == InputSpec::Kind::kStacked)
      FillStacked(feats, t, input_.left, input_.right, dst);
    else
      FillImage(feats, t, input_.left, input_.right, dst);
  }
  return x;
}

Tensor<float> Model::InferBottleneck(const Tensor<float> &inputs) const {
  Tensor<float> x = inputs;
  for (int i = 0; i <= bottleneck_index_; ++i) x = trunk_[i]->Infer(x);
  return x;
}

Tensor<float> Model::InferLogits(const Tensor<float> &inputs, int head) const {
  Tensor<float> x = inputs;
  for (const auto &l : trunk_) x = l->Infer(x);
  return heads_.at(head).dense->Infer(x);
}

FeatureMatrix Model::ExtractBottleneck(const FeatureMatrix &feats) const {
  constexpr std::size_t kChunk = 256;
  const int dims = bottleneck_dims();
  FeatureMatrix out(feats.id(), feats.frames(), dims);
  for (std::size_t begin = 0; begin < feats.frames(); begin += kChunk) {
    std::size_t end = std::min(feats.frames(), begin + kChunk);
    Tensor<float> z = InferBottleneck(BuildInput(feats, begin, end));
    std::copy(z.vec().begin(), z.vec().end(), out.data().begin() + begin * dims);
  }
  return out;
}

BatchLoss Model::ComputeGradients(const TrainBatch &batch, Rng &rng) {
  const int n = static_cast<int>(batch.labels.size());
  if (n == 0) throw DataError("empty training batch");
  if (batch.head_of_sample.size() != batch.labels.size())
    throw DataError("batch: head_of_sample and labels differ in length");
  for (int h : batch.head_of_sample)
    if (h < 0 || h >= static_cast<int>(heads_.size()))
      throw DataError("batch: sample language has no head");
  for (Param<float> *p : Params()) p->grad.Fill(0);

  Tensor<float> z = batch.inputs;
  for (auto &l : trunk_) z = l->Forward(z, rng);
  const int width = z.dim(1);
  Tensor<float> dz(z.shape());
  BatchLoss result;
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    std::vector<int> rows;
    for (int i = 0; i < n; ++i)
      if (batch.head_of_sample[i] == static_cast<int>(h)) rows.push_back(i);
    if (rows.empty()) continue;
    Tensor<float> zh({static_cast<int>(rows.size()), width});
    std::vector<int> labels(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::copy_n(z.data() + static_cast<std::size_t>(rows[r]) * width, width,
                  zh.data() + r * width);
      labels[r] = batch.labels[rows[r]];
    }
    Tensor<float> logits = heads_[h].dense->Forward(zh, rng);
    auto xent = SoftmaxXent(logits, labels, n);
    result.loss += xent.loss;
    result.correct += xent.correct;
    Tensor<float> dzh = heads_[h].dense->Backward(xent.grad);
    for (std::size_t r = 0; r < rows.size(); ++r)
      std::copy_n(dzh.data() + r * width, width,
                  dz.data() + static_cast<std::size_t>(rows[r]) * width);
  }
  for (auto it = trunk_.rbegin(); it != trunk_.rend(); ++it) dz = (*it)->Backward(dz);
  return result;
}

std::vector<Param<float> *> Model::TrunkParams() {
  std::vector<Param<float> *> out;
  for (auto &l : trunk_)
    for (Param<float> *p : l->Params()) out.push_back(p);
  return out;
}

std::vector<Param<float> *> Model::HeadParams(int head) {
  return heads_.at(head).dense->Params();
}

std::vector<Param<float> *> Model::Params() {
  std::vector<Param<float> *> out = TrunkParams();
  for (std::size_t h = 0; h < heads_.size(); ++h)
    for (Param<float> *p : HeadParams(static_cast<int>(h))) out.push_back(p);
  return out;
}

ParamCount Model::CountParams() const {
  ParamCount pc;
  for (std::size_t i = 0; i < trunk_.size(); ++i) {
    std::size_t n = trunk_[i]->NumTrainable();
    if (n == 0) continue;
    pc.items.push_back({"trunk[" + std::to_string(i) + "] " + trunk_[i]->spec().ToString(), n});
  }
  for (const auto &h : heads_)
    pc.items.push_back({"head " + h.language_id + " " + h.dense->spec().ToString(),
                        h.dense->NumTrainable()});
  for (const auto &it : pc.items) pc.total += it.count;
  return pc;
}

void Model::Save(const std::string &path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ArchiveError(ArchiveError::Kind::kIo, "cannot open " + path + " for writing");
  internal::LeWriter w(os);
  w.PutBytes(kCheckpointMagic, 4);
  w.Put(kCheckpointVersion);
  w.Put(static_cast<uint8_t>(architecture_));
  w.Put(static_cast<uint8_t>(input_.kind));
  w.Put(static_cast<uint32_t>(input_.left));
  w.Put(static_cast<uint32_t>(input_.right));
  w.Put(static_cast<uint32_t>(input_.base_dims));
  w.Put(static_cast<uint32_t>(bottleneck_index_));
  w.Put(static_cast<uint32_t>(trunk_.size()));
  for (const auto &l : trunk_) WriteSpec(&w, l->spec());
  w.Put(static_cast<uint32_t>(heads_.size()));
  for (const auto &h : heads_) {
    w.PutString16(h.language_id);
    WriteSpec(&w, h.dense->spec());
  }
  for (const auto &l : trunk_) WriteParams(&w, *l);
  for (const auto &h : heads_) WriteParams(&w, *h.dense);
  if (!os) throw ArchiveError(ArchiveError::Kind::kIo, "write failed for " + path);
}

Model Model::Load(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArchiveError(ArchiveError::Kind::kIo, "cannot open " + path);
  internal::LeReader r(is, path);
  char magic[4];
  r.GetBytes(magic, 4, "magic");
  if (!std::equal(magic, magic + 4, kCheckpointMagic))
    throw ArchiveError(ArchiveError::Kind::kBadMagic, path + ": bad magic");
  uint32_t version = r.Get<uint32_t>("version");
  if (version != kCheckpointVersion)
    throw ArchiveError(ArchiveError::Kind::kBadRecord,
                       path + ": unsupported checkpoint version " + std::to_string(version));
  Model m;
  m.architecture_ = static_cast<Architecture>(r.Get<uint8_t>("architecture"));
  m.input_.kind = static_cast<InputSpec::Kind>(r.Get<uint8_t>("input kind"));
  m.input_.left = static_cast<int>(r.Get<uint32_t>("input left"));
  m.input_.right = static_cast<int>(r.Get<uint32_t>("input right"));
  m.input_.base_dims = static_cast<int>(r.Get<uint32_t>("input dims"));
  m.bottleneck_index_ = static_cast<int>(r.Get<uint32_t>("bottleneck index"));
  uint32_t num_layers = r.Get<uint32_t>("layer count");
  for (uint32_t i = 0; i < num_layers; ++i) m.trunk_.push_back(MakeLayer<float>(ReadSpec(&r)));
  if (m.bottleneck_index_ < 0 || m.bottleneck_index_ >= static_cast<int>(num_layers))
    throw ArchiveError(ArchiveError::Kind::kBadRecord, path + ": bad bottleneck index");
  uint32_t num_heads = r.Get<uint32_t>("head count");
  for (uint32_t h = 0; h < num_heads; ++h) {
    std::string id = r.GetString16("head id");
    LayerSpec spec = ReadSpec(&r);
    m.heads_.push_back({id, spec.out, MakeLayer<float>(spec)});
  }
  for (auto &l : m.trunk_) ReadParams(&r, l.get());
  for (auto &h : m.heads_) ReadParams(&r, h.dense.get());
  return m;
}

void Model::WriteManifest(const std::string &path) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  os << "architecture " << ArchitectureName(architecture_) << "\n";
  os << "input " << (input_.kind == InputSpec::Kind::kStacked ? "stacked" : "image") << " "
     << input_.left << " " << input_.right << " " << input_.base_dims << "\n";
  os << "bottleneck_index " << bottleneck_index_ << "\n";
  os << "bottleneck_dims " << bottleneck_dims() << "\n";
  for (const auto &h : heads_) os << "language " << h.language_id << " " << h.num_classes << "\n";
  os << "parameters " << CountParams().total << "\n";
}

}  // namespace qbe
