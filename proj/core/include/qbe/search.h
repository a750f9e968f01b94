// core/include/qbe/search.h

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

#ifndef QBE_SEARCH_H_
#define QBE_SEARCH_H_

#include <vector>

#include "qbe/feature-matrix.h"
#include "qbe/score-table.h"

namespace qbe {

// Frame-level similarity (1 + cos(q_i, d_j)) / 2, in [0, 1].
struct SimilarityMatrix {
  std::size_t rows = 0;  // query frames
  std::size_t cols = 0;  // document frames
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double &operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

// A zero-norm frame has cosine 0 (similarity 0.5) against everything; the
// number of such frames is reported through zero_norm_frames.
SimilarityMatrix Similarity(const FeatureMatrix &query, const FeatureMatrix &doc,
                            std::size_t *zero_norm_frames = nullptr);

struct DtwConfig {
  int max_consecutive_nondiagonal = 2;
};

struct PathStep {
  int i = 0;  // query frame
  int j = 0;  // document frame
  friend bool operator==(const PathStep &, const PathStep &) = default;
};

struct MatchResult {
  double score = 0.0;   // path_sum / path length
  double path_sum = 0.0;
  int doc_start = 0;
  int doc_end = 0;
  std::vector<PathStep> path;
};

// Subsequence DTW with per-step partial-path-length normalisation.
//
// States are (i, j, c) where c counts consecutive non-diagonal moves
// (vertical (i-1, j) or horizontal (i, j-1)), capped at
// max_consecutive_nondiagonal; a diagonal move (i-1, j-1) resets c to 0.
// Each state keeps the single predecessor whose extended path has the
// highest average similarity (ties: longer path). Row 0 starts fresh at
// every document frame, and the answer is the best state in the last query
// row (ties: longer path, then smaller j). The returned path realises the
// returned score exactly. Throws DataError when no legal path reaches the
// last query frame.
MatchResult DtwSubsequence(const SimilarityMatrix &sim, const DtwConfig &cfg = {});

struct SearchOptions {
  DtwConfig dtw;
  int threads = 1;
};

struct SearchTiming {
  double wall_seconds = 0.0;
  std::size_t pairs = 0;
  int threads = 1;
};

// Scores every (query, document) pair. The table is identical for any
// thread count. A pair whose query has more than
// (max_consecutive_nondiagonal + 1) * document frames admits no legal path
// and scores 0.
ScoreTable SearchAll(const std::vector<FeatureMatrix> &queries,
                     const std::vector<FeatureMatrix> &docs, const SearchOptions &opts = {},
                     SearchTiming *timing = nullptr);

}  // namespace qbe

#endif  // QBE_SEARCH_H_
