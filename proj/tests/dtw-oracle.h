// tests/dtw-oracle.h

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

#ifndef QBE_TESTS_DTW_ORACLE_H_
#define QBE_TESTS_DTW_ORACLE_H_

#include <algorithm>
#include <map>
#include <tuple>
#include <vector>

#include "qbe/rng.h"
#include "qbe/search.h"

namespace qbe::testing {

// Top-down restatement of the subsequence DTW recurrence, memoised on
// (i, j, c). A state's value is the best one-step extension of its
// predecessors' values: higher average, then longer, then earlier
// candidate (diagonal by ascending c, vertical, horizontal).
class DtwOracle {
 public:
  DtwOracle(const SimilarityMatrix &s, int k) : s_(s), k_(k) {}

  struct Value {
    bool reachable = false;
    double sum = 0.0;
    int len = 0;
    std::vector<PathStep> path;
  };

  const Value &Get(int i, int j, int c) {
    auto key = std::make_tuple(i, j, c);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    Value v;
    const double here = s_(i, j);
    auto consider = [&](const Value &p) {
      if (!p.reachable) return;
      double sum = p.sum + here;
      int len = p.len + 1;
      if (!v.reachable || sum / len > v.sum / v.len ||
          (sum / len == v.sum / v.len && len > v.len)) {
        v.reachable = true;
        v.sum = sum;
        v.len = len;
        v.path = p.path;
        v.path.push_back({i, j});
      }
    };
    if (c == 0) {
      if (i == 0) {
        v = {true, here, 1, {{i, j}}};
      } else if (j > 0) {
        for (int pc = 0; pc <= k_; ++pc) consider(Get(i - 1, j - 1, pc));
      }
    } else {
      if (i > 0) consider(Get(i - 1, j, c - 1));
      if (j > 0) consider(Get(i, j - 1, c - 1));
    }
    return memo_[key] = v;
  }

  // Best final state in the last row: average, then length, then smaller
  // j, then smaller c.
  Value Answer() {
    Value best;
    for (int j = 0; j < static_cast<int>(s_.cols); ++j)
      for (int c = 0; c <= k_; ++c) {
        const Value &v = Get(static_cast<int>(s_.rows) - 1, j, c);
        if (!v.reachable) continue;
        if (!best.reachable || v.sum / v.len > best.sum / best.len ||
            (v.sum / v.len == best.sum / best.len && v.len > best.len))
          best = v;
      }
    return best;
  }

 private:
  const SimilarityMatrix &s_;
  int k_;
  std::map<std::tuple<int, int, int>, Value> memo_;
};

// Visits every legal complete path (start anywhere in row 0, end anywhere
// in the last row, at most k consecutive non-diagonal moves).
template <typename Visit>
void EnumeratePaths(const SimilarityMatrix &s, int k, Visit &&visit) {
  const int m = static_cast<int>(s.rows), n = static_cast<int>(s.cols);
  std::vector<PathStep> path;
  auto rec = [&](auto &&self, int i, int j, int run) -> void {
    path.push_back({i, j});
    if (i == m - 1) visit(path);
    if (i + 1 < m && j + 1 < n) self(self, i + 1, j + 1, 0);
    if (run < k) {
      if (i + 1 < m) self(self, i + 1, j, run + 1);
      if (j + 1 < n) self(self, i, j + 1, run + 1);
    }
    path.pop_back();
  };
  for (int j = 0; j < n; ++j) rec(rec, 0, j, 0);
}

inline double PathAverage(const SimilarityMatrix &s, const std::vector<PathStep> &path) {
  double sum = 0;
  for (const auto &p : path) sum += s(p.i, p.j);
  return sum / path.size();
}

// True if the path uses only allowed moves, starts in row 0, ends in the
// last row, and never makes more than k non-diagonal moves in a row.
inline bool LegalPath(const SimilarityMatrix &s, const std::vector<PathStep> &path, int k) {
  if (path.empty() || path.front().i != 0 ||
      path.back().i != static_cast<int>(s.rows) - 1)
    return false;
  int run = 0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (path[t].j < 0 || path[t].j >= static_cast<int>(s.cols)) return false;
    if (t == 0) continue;
    int di = path[t].i - path[t - 1].i, dj = path[t].j - path[t - 1].j;
    if (di == 1 && dj == 1) {
      run = 0;
    } else if ((di == 1 && dj == 0) || (di == 0 && dj == 1)) {
      if (++run > k) return false;
    } else {
      return false;
    }
  }
  return true;
}

inline SimilarityMatrix RandomSimilarity(std::size_t rows, std::size_t cols, Rng &rng) {
  SimilarityMatrix s{rows, cols, std::vector<double>(rows * cols)};
  for (auto &v : s.values) v = rng.Uniform(0.0, 1.0);
  return s;
}

}  // namespace qbe::testing

#endif  // QBE_TESTS_DTW_ORACLE_H_
