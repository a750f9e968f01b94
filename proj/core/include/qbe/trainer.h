// core/include/qbe/trainer.h

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

#ifndef QBE_TRAINER_H_
#define QBE_TRAINER_H_

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qbe/feature-matrix.h"
#include "qbe/model.h"
#include "qbe/rng.h"

namespace qbe {

// Frame-labelled training material for one language.
struct LanguageData {
  std::string language_id;
  std::vector<FeatureMatrix> utterances;  // normalised base features
  std::vector<std::vector<int>> labels;   // one class index per frame

  std::size_t NumFrames() const;
};

struct SampleRef {
  int utterance = 0;
  int frame = 0;
};

struct LabelledSample {
  int language = 0;  // index into the language list given to the sampler
  SampleRef ref;
};

// Stratified sampling: every batch holds batch_size / L samples from each
// of the L languages. Each language is walked through a fresh permutation
// per epoch; the epoch ends once the largest language has been consumed,
// smaller languages wrapping around with a new permutation.
class MultilingualSampler {
 public:
  MultilingualSampler(std::vector<std::vector<SampleRef>> per_language, int batch_size);

  int per_language() const { return per_language_; }
  int batches_per_epoch() const { return batches_per_epoch_; }

  std::vector<std::vector<LabelledSample>> Epoch(Rng &rng);

 private:
  std::vector<std::vector<SampleRef>> samples_;
  int per_language_ = 0;
  int batches_per_epoch_ = 0;
};

struct TrainOptions {
  int batch_size = 255;
  int epochs = 50;
  uint64_t seed = 1;
  double lr_initial = 1e-3;
  double lr_floor = 1e-4;
  int max_batches_per_epoch = 0;  // 0 = full epoch
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;      // unweighted mean of per-language dev losses
  double dev_accuracy = 0.0;  // frame accuracy pooled over languages
  double lr = 0.0;            // rate used during this epoch
};

struct TrainResult {
  std::vector<EpochStats> epochs;
};

TrainBatch AssembleBatch(const Model &model, const std::vector<const LanguageData *> &data,
                         const std::vector<int> &head_of_language,
                         const std::vector<LabelledSample> &samples);

// Mean per-language cross-entropy on the dev split in inference mode.
double DevLoss(const Model &model, const std::vector<LanguageData> &dev,
               double *accuracy = nullptr);

// Multitask training with Adam and the halving schedule. The final epoch's
// parameters are kept.
TrainResult Train(Model *model, const std::vector<LanguageData> &train,
                  const std::vector<LanguageData> &dev, const TrainOptions &opts,
                  const std::function<void(const EpochStats &)> &on_epoch = {});

}  // namespace qbe

#endif  // QBE_TRAINER_H_
