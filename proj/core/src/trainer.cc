// core/src/trainer.cc

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

#include "qbe/trainer.h"

#include <algorithm>

#include "qbe/errors.h"
#include "qbe/nn-train.h"

namespace qbe {

std::size_t LanguageData::NumFrames() const {
  std::size_t n = 0;
  for (const auto &u : utterances) n += u.frames();
  return n;
}

MultilingualSampler::MultilingualSampler(std::vector<std::vector<SampleRef>> per_language,
                                         int batch_size)
    : samples_(std::move(per_language)) {
  if (samples_.empty()) throw DataError("sampler: no languages");
  const int num_langs = static_cast<int>(samples_.size());
  per_language_ = batch_size / num_langs;
  if (per_language_ < 1)
    throw ConfigError("batch size " + std::to_string(batch_size) + " is smaller than " +
                      std::to_string(num_langs) + " languages");
  std::size_t largest = 0;
  for (const auto &s : samples_) {
    if (s.empty()) throw DataError("sampler: a language has no training frames");
    largest = std::max(largest, s.size());
  }
  batches_per_epoch_ =
      static_cast<int>((largest + per_language_ - 1) / static_cast<std::size_t>(per_language_));
}

std::vector<std::vector<LabelledSample>> MultilingualSampler::Epoch(Rng &rng) {
  const int num_langs = static_cast<int>(samples_.size());
  std::vector<std::vector<int>> order(num_langs);
  std::vector<std::size_t> cursor(num_langs, 0);
  auto reshuffle = [&](int l) {
    order[l].resize(samples_[l].size());
    for (std::size_t i = 0; i < order[l].size(); ++i) order[l][i] = static_cast<int>(i);
    rng.Shuffle(&order[l]);
    cursor[l] = 0;
  };
  for (int l = 0; l < num_langs; ++l) reshuffle(l);

  std::vector<std::vector<LabelledSample>> batches(batches_per_epoch_);
  for (auto &batch : batches) {
    batch.reserve(static_cast<std::size_t>(per_language_) * num_langs);
    for (int l = 0; l < num_langs; ++l)
      for (int k = 0; k < per_language_; ++k) {
        if (cursor[l] == order[l].size()) reshuffle(l);
        batch.push_back({l, samples_[l][order[l][cursor[l]++]]});
      }
  }
  return batches;
}

TrainBatch AssembleBatch(const Model &model, const std::vector<const LanguageData *> &data,
                         const std::vector<int> &head_of_language,
                         const std::vector<LabelledSample> &samples) {
  const InputSpec &spec = model.input_spec();
  const std::size_t flat = spec.FlatSize();
  TrainBatch batch;
  batch.inputs = Tensor<float>(spec.Shape(static_cast<int>(samples.size())));
  batch.labels.resize(samples.size());
  batch.head_of_sample.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto &s = samples[i];
    const LanguageData &lang = *data[s.language];
    const FeatureMatrix &utt = lang.utterances[s.ref.utterance];
    std::span<float> dst(batch.inputs.data() + i * flat, flat);
    if (spec.kind == InputSpec::Kind::kStacked)
      FillStacked(utt, s.ref.frame, spec.left, spec.right, dst);
    else
      FillImage(utt, s.ref.frame, spec.left, spec.right, dst);
    batch.labels[i] = lang.labels[s.ref.utterance][s.ref.frame];
    batch.head_of_sample[i] = head_of_language[s.language];
  }
  return batch;
}

namespace {

std::vector<int> HeadsFor(const Model &model, const std::vector<LanguageData> &data) {
  std::vector<int> heads;
  for (const auto &l : data) {
    int h = model.HeadIndex(l.language_id);
    if (h < 0) throw DataError("language '" + l.language_id + "' has no output head");
    heads.push_back(h);
  }
  return heads;
}

void CheckSplit(const std::vector<LanguageData> &split, const char *name) {
  if (split.empty()) throw DataError(std::string("empty ") + name + " split");
  for (const auto &l : split) {
    if (l.utterances.size() != l.labels.size())
      throw DataError(std::string(name) + " split: language " + l.language_id +
                      " has mismatched utterances and labels");
    for (std::size_t u = 0; u < l.utterances.size(); ++u)
      if (l.labels[u].size() != l.utterances[u].frames())
        throw DataError(std::string(name) + " split: utterance '" + l.utterances[u].id() +
                        "' label count differs from frame count");
    if (l.NumFrames() == 0)
      throw DataError(std::string("empty ") + name + " split for language " + l.language_id);
  }
}

}  // namespace

double DevLoss(const Model &model, const std::vector<LanguageData> &dev, double *accuracy) {
  constexpr std::size_t kChunk = 512;
  std::vector<int> heads = HeadsFor(model, dev);
  double mean_loss = 0.0;
  std::size_t correct = 0, total = 0;
  for (std::size_t l = 0; l < dev.size(); ++l) {
    double loss = 0.0;
    std::size_t frames = 0;
    for (std::size_t u = 0; u < dev[l].utterances.size(); ++u) {
      const auto &utt = dev[l].utterances[u];
      for (std::size_t b = 0; b < utt.frames(); b += kChunk) {
        std::size_t e = std::min(utt.frames(), b + kChunk);
        Tensor<float> logits = model.InferLogits(model.BuildInput(utt, b, e), heads[l]);
        std::span<const int> labels(dev[l].labels[u].data() + b, e - b);
        auto x = SoftmaxXent(logits, labels, 1.0);
        loss += x.loss;
        correct += x.correct;
      }
      frames += utt.frames();
    }
    total += frames;
    mean_loss += loss / static_cast<double>(frames);
  }
  if (accuracy) *accuracy = total ? static_cast<double>(correct) / total : 0.0;
  return mean_loss / static_cast<double>(dev.size());
}

TrainResult Train(Model *model, const std::vector<LanguageData> &train,
                  const std::vector<LanguageData> &dev, const TrainOptions &opts,
                  const std::function<void(const EpochStats &)> &on_epoch) {
  CheckSplit(train, "train");
  CheckSplit(dev, "dev");
  std::vector<int> train_heads = HeadsFor(*model, train);
  HeadsFor(*model, dev);

  std::vector<std::vector<SampleRef>> refs(train.size());
  std::vector<const LanguageData *> data;
  for (std::size_t l = 0; l < train.size(); ++l) {
    data.push_back(&train[l]);
    for (std::size_t u = 0; u < train[l].utterances.size(); ++u)
      for (std::size_t t = 0; t < train[l].utterances[u].frames(); ++t)
        refs[l].push_back({static_cast<int>(u), static_cast<int>(t)});
  }
  MultilingualSampler sampler(std::move(refs), opts.batch_size);

  Rng rng(opts.seed);
  AdamOptimizer<float> adam(model->Params());
  LrSchedule schedule(opts.lr_initial, opts.lr_floor);
  double lr = schedule.lr();
  TrainResult result;
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    auto batches = sampler.Epoch(rng);
    if (opts.max_batches_per_epoch > 0 &&
        static_cast<int>(batches.size()) > opts.max_batches_per_epoch)
      batches.resize(opts.max_batches_per_epoch);
    double train_loss = 0.0;
    for (const auto &b : batches) {
      TrainBatch batch = AssembleBatch(*model, data, train_heads, b);
      train_loss += model->ComputeGradients(batch, rng).loss;
      adam.Step(lr);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.train_loss = train_loss / static_cast<double>(batches.size());
    stats.dev_loss = DevLoss(*model, dev, &stats.dev_accuracy);
    lr = schedule.Update(stats.dev_loss);
    result.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

}  // namespace qbe
