// core/src/search.cc

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

#include "qbe/search.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "qbe/errors.h"

namespace qbe {

SimilarityMatrix Similarity(const FeatureMatrix &query, const FeatureMatrix &doc,
                            std::size_t *zero_norm_frames) {
  if (query.dims() != doc.dims())
    throw DataError("similarity: query '" + query.id() + "' has " +
                    std::to_string(query.dims()) + " dims, document '" + doc.id() + "' has " +
                    std::to_string(doc.dims()));
  const std::size_t m = query.frames(), n = doc.frames(), dims = query.dims();
  auto norms = [dims](const FeatureMatrix &f) {
    std::vector<double> out(f.frames());
    for (std::size_t t = 0; t < f.frames(); ++t) {
      double s = 0.0;
      for (float v : f.Row(t)) s += static_cast<double>(v) * v;
      out[t] = std::sqrt(s);
    }
    return out;
  };
  const auto qn = norms(query), dn = norms(doc);
  std::size_t zeros = 0;
  for (double v : qn) zeros += v == 0.0;
  for (double v : dn) zeros += v == 0.0;

  SimilarityMatrix sim{m, n, std::vector<double>(m * n)};
  for (std::size_t i = 0; i < m; ++i) {
    const float *q = query.Row(i).data();
    for (std::size_t j = 0; j < n; ++j) {
      if (qn[i] == 0.0 || dn[j] == 0.0) {
        sim(i, j) = 0.5;
        continue;
      }
      const float *d = doc.Row(j).data();
      double dot = 0.0;
      for (std::size_t k = 0; k < dims; ++k) dot += static_cast<double>(q[k]) * d[k];
      double cosine = std::clamp(dot / (qn[i] * dn[j]), -1.0, 1.0);
      sim(i, j) = 0.5 * (1.0 + cosine);
    }
  }
  if (zeros > 0)
    spdlog::warn("similarity: {} zero-norm frame(s) in '{}' vs '{}' treated as cosine 0", zeros,
                 query.id(), doc.id());
  if (zero_norm_frames) *zero_norm_frames = zeros;
  return sim;
}

namespace {

struct Cell {
  double sum = 0.0;
  int len = 0;      // 0 = unreachable
  int back = -1;    // flat index of the predecessor state, -1 at a start
};

// True if (sum_a, len_a) beats (sum_b, len_b): higher average, then longer.
inline bool Better(double sum_a, int len_a, double sum_b, int len_b) {
  if (len_b == 0) return len_a > 0;
  const double avg_a = sum_a / len_a, avg_b = sum_b / len_b;
  if (avg_a != avg_b) return avg_a > avg_b;
  return len_a > len_b;
}

}  // namespace

MatchResult DtwSubsequence(const SimilarityMatrix &sim, const DtwConfig &cfg) {
  if (sim.rows == 0 || sim.cols == 0) throw DataError("dtw: empty similarity matrix");
  if (cfg.max_consecutive_nondiagonal < 1)
    throw ConfigError("dtw: max_consecutive_nondiagonal must be >= 1");
  const int m = static_cast<int>(sim.rows), n = static_cast<int>(sim.cols);
  const int slopes = cfg.max_consecutive_nondiagonal + 1;
  auto index = [n, slopes](int i, int j, int c) {
    return (static_cast<std::size_t>(i) * n + j) * slopes + c;
  };
  std::vector<Cell> cells(static_cast<std::size_t>(m) * n * slopes);

  auto relax = [&](Cell *dst, std::size_t from, double s) {
    const Cell &src = cells[from];
    if (src.len == 0) return;
    if (Better(src.sum + s, src.len + 1, dst->sum, dst->len)) {
      dst->sum = src.sum + s;
      dst->len = src.len + 1;
      dst->back = static_cast<int>(from);
    }
  };

  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      const double s = sim(i, j);
      Cell &diag = cells[index(i, j, 0)];
      if (i == 0) {
        diag = {s, 1, -1};
      } else if (j > 0) {
        for (int c = 0; c < slopes; ++c) relax(&diag, index(i - 1, j - 1, c), s);
      }
      for (int c = 1; c < slopes; ++c) {
        Cell &cell = cells[index(i, j, c)];
        if (i > 0) relax(&cell, index(i - 1, j, c - 1), s);
        if (j > 0) relax(&cell, index(i, j - 1, c - 1), s);
      }
    }
  }

  std::size_t best = 0;
  bool found = false;
  for (int j = 0; j < n; ++j)
    for (int c = 0; c < slopes; ++c) {
      std::size_t k = index(m - 1, j, c);
      if (cells[k].len == 0) continue;
      if (!found || Better(cells[k].sum, cells[k].len, cells[best].sum, cells[best].len)) {
        best = k;
        found = true;
      }
    }
  if (!found) throw DataError("dtw: no legal path reaches the last query frame");

  MatchResult r;
  r.path_sum = cells[best].sum;
  r.score = cells[best].sum / cells[best].len;
  for (int k = static_cast<int>(best); k >= 0; k = cells[k].back) {
    int cell = k / slopes;
    r.path.push_back({cell / n, cell % n});
  }
  std::reverse(r.path.begin(), r.path.end());
  r.doc_start = r.path.front().j;
  r.doc_end = r.path.back().j;
  return r;
}

ScoreTable SearchAll(const std::vector<FeatureMatrix> &queries,
                     const std::vector<FeatureMatrix> &docs, const SearchOptions &opts,
                     SearchTiming *timing) {
  if (queries.empty()) throw DataError("search: empty query set");
  if (docs.empty()) throw DataError("search: empty document set");
  const std::size_t pairs = queries.size() * docs.size();
  std::vector<double> scores(pairs);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> unreachable{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&]() {
    for (std::size_t p = next++; p < pairs; p = next++) {
      const auto &q = queries[p / docs.size()];
      const auto &d = docs[p % docs.size()];
      try {
        auto sim = Similarity(q, d);
        // A query too long for the document under the slope limit has no
        // legal path at all; it cannot match.
        if (sim.rows > static_cast<std::size_t>(opts.dtw.max_consecutive_nondiagonal + 1) *
                           sim.cols) {
          scores[p] = 0.0;
          ++unreachable;
        } else {
          scores[p] = DtwSubsequence(sim, opts.dtw).score;
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, opts.threads);
  auto start = std::chrono::steady_clock::now();
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
  }
  auto stop = std::chrono::steady_clock::now();
  if (error) std::rethrow_exception(error);
  if (unreachable > 0)
    spdlog::warn("search: {} pair(s) with a query too long for the document scored 0",
                 unreachable.load());

  ScoreTable table;
  for (std::size_t p = 0; p < pairs; ++p)
    table.Add(queries[p / docs.size()].id(), docs[p % docs.size()].id(), scores[p]);
  if (timing) {
    timing->wall_seconds = std::chrono::duration<double>(stop - start).count();
    timing->pairs = pairs;
    timing->threads = threads;
  }
  return table;
}

}  // namespace qbe
