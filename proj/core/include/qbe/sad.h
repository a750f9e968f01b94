// core/include/qbe/sad.h

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

#ifndef QBE_SAD_H_
#define QBE_SAD_H_

#include <map>
#include <string>
#include <vector>

#include "qbe/feature-matrix.h"

namespace qbe {

// Per-frame class posteriors of one recogniser for one utterance.
struct PosteriorStream {
  FeatureMatrix posteriors;    // frames x classes, rows sum to 1
  std::vector<int> nonspeech;  // silence / noise class indices
};

struct SadOptions {
  // A frame is dropped when mean non-speech mass >= mean max speech
  // posterior + bias.
  double bias = 0.0;
  std::size_t min_frames = 10;
};

// Throws DataError unless rows sum to 1 +/- 1e-4 with entries in [0, 1].
void ValidateStream(const PosteriorStream &stream);

// Mean over streams of the summed non-speech posterior, per frame.
std::vector<double> NonspeechScore(const std::vector<PosteriorStream> &streams);

// Mean over streams of the largest single speech-class posterior, per frame.
std::vector<double> MaxSpeechScore(const std::vector<PosteriorStream> &streams);

// Indices of frames judged to be speech, ascending.
std::vector<std::size_t> SpeechFrames(const std::vector<PosteriorStream> &streams,
                                      const SadOptions &opts = {});

// Removes non-speech frames, preserving the order of the rest.
FeatureMatrix FilterFrames(const FeatureMatrix &feats,
                           const std::vector<PosteriorStream> &streams,
                           const SadOptions &opts = {});

// Utterances with fewer than min_frames frames after SAD are dropped.
bool Admit(const FeatureMatrix &feats, const SadOptions &opts = {});

// Sidecar listing, per stream, the archive holding its posteriors and its
// non-speech class indices. One line per stream:
//   <archive-path> <index> [<index> ...]
// Relative archive paths are resolved against the sidecar's directory.
struct SadSidecar {
  std::vector<std::string> archives;
  std::vector<std::vector<int>> nonspeech;
};

SadSidecar ReadSadSidecar(const std::string &path);
void WriteSadSidecar(const SadSidecar &sidecar, const std::string &path);

// Loads all stream archives of a sidecar, keyed by utterance id.
std::map<std::string, std::vector<PosteriorStream>> LoadPosteriorStreams(
    const SadSidecar &sidecar);

}  // namespace qbe

#endif  // QBE_SAD_H_
