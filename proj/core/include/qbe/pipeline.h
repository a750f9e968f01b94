// core/include/qbe/pipeline.h

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

#ifndef QBE_PIPELINE_H_
#define QBE_PIPELINE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qbe/config.h"
#include "qbe/eval.h"
#include "qbe/frontend.h"
#include "qbe/model.h"
#include "qbe/sad.h"
#include "qbe/search.h"
#include "qbe/synth.h"
#include "qbe/trainer.h"

namespace qbe {

enum class FeatureKind { kRaw, kFfn, kResnet };

struct ExperimentConfig {
  std::string out_dir = "run";
  std::string corpus_dir;  // "" = <out_dir>/corpus
  uint64_t seed = 1;
  SyntheticCorpusConfig synth;  // used when the corpus does not exist yet

  FeatureKind features = FeatureKind::kFfn;
  std::vector<std::string> languages;  // empty = every corpus language
  FfnConfig ffn;
  ResnetConfig resnet;
  TrainOptions train;
  std::string checkpoint;  // load instead of training when the file exists

  int delta_window = 2;
  bool sad_enabled = true;
  SadOptions sad;
  SearchOptions search;
  EvalConfig eval;

  // Reads every known key; unknown keys raise ConfigError.
  static ExperimentConfig FromConfig(const Config &cfg);
  static SyntheticCorpusConfig SynthFromConfig(const Config &cfg, uint64_t seed);
};

const char *FeatureKindName(FeatureKind kind);

// Static features -> deltas appended.
std::vector<FeatureMatrix> Featurize(const std::vector<FeatureMatrix> &statics, int window);
std::vector<FeatureMatrix> ApplyCmvn(const Cmvn &cmvn, const std::vector<FeatureMatrix> &feats);

// Training material of one language from a corpus: featurized, normalised,
// paired with frame labels.
LanguageData LoadLanguageSplit(const CorpusManifest &manifest, const std::string &corpus_dir,
                               const std::string &split, int delta_window, const Cmvn &cmvn);

// Bottleneck features per utterance.
std::vector<FeatureMatrix> ExtractAll(const Model &model, const std::vector<FeatureMatrix> &feats);

// SAD-filters every utterance and drops those left too short. Ids of
// dropped utterances are appended to *dropped when given.
std::vector<FeatureMatrix> ApplySad(const std::vector<FeatureMatrix> &feats,
                                    const std::map<std::string, std::vector<PosteriorStream>> &streams,
                                    const SadOptions &opts,
                                    std::vector<std::string> *dropped = nullptr);

// cfg.languages, or every corpus language when empty.
std::vector<std::string> SelectLanguages(const ExperimentConfig &cfg,
                                         const CorpusManifest &manifest);

// Normalisation statistics from the featurized training splits of the
// given languages.
Cmvn EstimateCorpusCmvn(const CorpusManifest &manifest, const std::string &corpus_dir,
                        const std::vector<std::string> &languages, int delta_window);

// Builds the configured architecture with one head per language and trains
// it on the corpus. Model init uses cfg.seed, batch sampling cfg.seed + 1.
Model TrainModel(const ExperimentConfig &cfg, const CorpusManifest &manifest,
                 const std::string &corpus_dir, const std::vector<std::string> &languages,
                 const Cmvn &cmvn, std::vector<EpochStats> *epochs = nullptr);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineResult {
  MetricReport report;
  std::vector<StageTiming> timings;
  SearchTiming search;
  std::vector<EpochStats> epochs;
  std::string config_hash;
};

// featurize -> train (or load) -> extract -> SAD -> search -> znorm ->
// evaluate, writing each intermediate and a run log under cfg.out_dir.
PipelineResult RunPipeline(const ExperimentConfig &cfg, const std::string &config_hash = "");

}  // namespace qbe

#endif  // QBE_PIPELINE_H_
