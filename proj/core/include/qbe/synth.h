// core/include/qbe/synth.h

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

#ifndef QBE_SYNTH_H_
#define QBE_SYNTH_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qbe/feature-matrix.h"
#include "qbe/rng.h"

namespace qbe {

// Generative model: each phone is a spherical Gaussian around a random mean
// in the static feature space. Frames get a per-utterance speaker offset plus
// per-frame noise. Class 0 of every language is silence.
struct SyntheticCorpusConfig {
  int num_languages = 3;
  int phones_per_language = 40;
  double shared_phone_fraction = 0.5;
  int novel_phones = 4;  // search-language phones unseen in training
  int feature_dim = 39;  // static dims = feature_dim / 3; deltas come later

  int train_utterances = 60;
  int dev_utterances = 10;
  int utterance_phones_min = 10;
  int utterance_phones_max = 20;

  int query_count = 30;
  int query_phones_min = 3;
  int query_phones_max = 8;
  int document_count = 60;
  int document_phones_min = 20;
  int document_phones_max = 40;
  double plant_rate = 0.1;

  int frames_per_phone_min = 3;
  int frames_per_phone_max = 7;
  double phone_mean_scale = 1.0;
  // When > 0, phone means are sums of this many shared binary feature
  // directions plus a small phone-specific residual, so phones of different
  // languages share structure. 0 draws means independently.
  int articulatory_features = 0;
  double articulatory_density = 0.4;
  double phone_residual = 0.3;
  double emission_noise = 0.7;
  double speaker_scale = 2.5;
  double silence_rate = 0.15;  // chance of a pause after each phone
  int edge_silence_min = 5;
  int edge_silence_max = 15;

  int sad_streams = 3;
  int sad_speech_classes = 8;
  double sad_confidence = 4.0;

  uint64_t seed = 1;

  int static_dims() const { return feature_dim / 3; }
  // Throws ConfigError when no corpus can satisfy the settings.
  void Validate() const;
};

struct CorpusSplit {
  std::string name;      // e.g. "train-L1", "queries"
  std::string language;  // "" for the search language
  std::string archive;   // feature archive, relative to the corpus dir
  std::string alignment; // frame labels, relative; "" if absent
  std::vector<std::string> utterances;
};

struct CorpusManifest {
  std::vector<std::string> languages;          // training languages
  std::map<std::string, int> num_classes;      // per training language
  std::vector<CorpusSplit> splits;
  std::string query_sad;                       // posterior sidecars
  std::string document_sad;
  std::string trials;                          // labels TSV
  std::string phone_means;                     // archive, one record "means"
  uint64_t seed = 0;

  const CorpusSplit &Split(const std::string &name) const;
  void Write(const std::string &path) const;
  static CorpusManifest Read(const std::string &path);
};

// Text alignment: one line per utterance, "id label label ...".
void WriteAlignments(const std::map<std::string, std::vector<int>> &ali,
                     const std::string &path);
std::map<std::string, std::vector<int>> ReadAlignments(const std::string &path);

// Writes the corpus under dir and returns its manifest (also written to
// dir/manifest.txt). Same config, same bytes.
CorpusManifest SynthCorpus(const SyntheticCorpusConfig &cfg, const std::string &dir);

}  // namespace qbe

#endif  // QBE_SYNTH_H_
