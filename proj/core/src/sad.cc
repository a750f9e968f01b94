// core/src/sad.cc

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

#include "qbe/sad.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qbe/errors.h"

namespace qbe {

namespace {

std::size_t CommonFrames(const std::vector<PosteriorStream> &streams) {
  if (streams.empty()) throw DataError("SAD: no posterior streams");
  const std::size_t frames = streams.front().posteriors.frames();
  for (const auto &s : streams)
    if (s.posteriors.frames() != frames)
      throw DataError("SAD: frame-count mismatch between posterior streams for '" +
                      s.posteriors.id() + "' (" + std::to_string(s.posteriors.frames()) +
                      " vs " + std::to_string(frames) + ")");
  return frames;
}

std::vector<bool> NonspeechMask(const PosteriorStream &s) {
  std::vector<bool> mask(s.posteriors.dims(), false);
  for (int idx : s.nonspeech) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= mask.size())
      throw DataError("SAD: non-speech index " + std::to_string(idx) + " out of range");
    mask[idx] = true;
  }
  return mask;
}

}  // namespace

void ValidateStream(const PosteriorStream &stream) {
  const auto &p = stream.posteriors;
  for (std::size_t t = 0; t < p.frames(); ++t) {
    double sum = 0.0;
    for (float v : p.Row(t)) {
      if (!(v >= 0.0f && v <= 1.0f))
        throw DataError("posterior stream '" + p.id() + "': value outside [0,1] at frame " +
                        std::to_string(t));
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-4)
      throw DataError("posterior stream '" + p.id() + "': frame " + std::to_string(t) +
                      " sums to " + std::to_string(sum));
  }
  NonspeechMask(stream);
}

std::vector<double> NonspeechScore(const std::vector<PosteriorStream> &streams) {
  const std::size_t frames = CommonFrames(streams);
  std::vector<double> score(frames, 0.0);
  for (const auto &s : streams) {
    auto mask = NonspeechMask(s);
    for (std::size_t t = 0; t < frames; ++t) {
      auto row = s.posteriors.Row(t);
      double mass = 0.0;
      for (std::size_t c = 0; c < row.size(); ++c)
        if (mask[c]) mass += row[c];
      score[t] += mass;
    }
  }
  for (auto &v : score) v /= static_cast<double>(streams.size());
  return score;
}

std::vector<double> MaxSpeechScore(const std::vector<PosteriorStream> &streams) {
  const std::size_t frames = CommonFrames(streams);
  std::vector<double> score(frames, 0.0);
  for (const auto &s : streams) {
    auto mask = NonspeechMask(s);
    for (std::size_t t = 0; t < frames; ++t) {
      auto row = s.posteriors.Row(t);
      double best = 0.0;
      for (std::size_t c = 0; c < row.size(); ++c)
        if (!mask[c]) best = std::max(best, static_cast<double>(row[c]));
      score[t] += best;
    }
  }
  for (auto &v : score) v /= static_cast<double>(streams.size());
  return score;
}

std::vector<std::size_t> SpeechFrames(const std::vector<PosteriorStream> &streams,
                                      const SadOptions &opts) {
  auto nonspeech = NonspeechScore(streams);
  auto speech = MaxSpeechScore(streams);
  std::vector<std::size_t> keep;
  for (std::size_t t = 0; t < nonspeech.size(); ++t)
    if (nonspeech[t] < speech[t] + opts.bias) keep.push_back(t);
  return keep;
}

FeatureMatrix FilterFrames(const FeatureMatrix &feats,
                           const std::vector<PosteriorStream> &streams,
                           const SadOptions &opts) {
  if (CommonFrames(streams) != feats.frames())
    throw DataError("SAD: '" + feats.id() + "' has " + std::to_string(feats.frames()) +
                    " frames but posterior streams have " +
                    std::to_string(streams.front().posteriors.frames()));
  return feats.SelectRows(SpeechFrames(streams, opts));
}

bool Admit(const FeatureMatrix &feats, const SadOptions &opts) {
  return feats.frames() >= opts.min_frames;
}

SadSidecar ReadSadSidecar(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open SAD sidecar " + path);
  const auto dir = std::filesystem::path(path).parent_path();
  SadSidecar sc;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string archive;
    ls >> archive;
    std::vector<int> idx;
    int v;
    while (ls >> v) idx.push_back(v);
    if (idx.empty()) throw DataError(path + ": stream '" + archive + "' lists no classes");
    std::filesystem::path p(archive);
    sc.archives.push_back(p.is_absolute() ? archive : (dir / p).string());
    sc.nonspeech.push_back(std::move(idx));
  }
  if (sc.archives.empty()) throw DataError(path + ": no streams listed");
  return sc;
}

void WriteSadSidecar(const SadSidecar &sidecar, const std::string &path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path);
  for (std::size_t s = 0; s < sidecar.archives.size(); ++s) {
    os << sidecar.archives[s];
    for (int i : sidecar.nonspeech[s]) os << " " << i;
    os << "\n";
  }
}

std::map<std::string, std::vector<PosteriorStream>> LoadPosteriorStreams(
    const SadSidecar &sidecar) {
  std::map<std::string, std::vector<PosteriorStream>> out;
  for (std::size_t s = 0; s < sidecar.archives.size(); ++s) {
    for (auto &m : ReadArchive(sidecar.archives[s])) {
      PosteriorStream ps{std::move(m), sidecar.nonspeech[s]};
      ValidateStream(ps);
      auto &vec = out[ps.posteriors.id()];
      if (vec.size() != s)
        throw DataError("posterior streams: utterance '" + ps.posteriors.id() +
                        "' missing from an earlier stream");
      vec.push_back(std::move(ps));
    }
  }
  for (const auto &[id, v] : out)
    if (v.size() != sidecar.archives.size())
      throw DataError("posterior streams: utterance '" + id + "' missing from a stream");
  return out;
}

}  // namespace qbe
