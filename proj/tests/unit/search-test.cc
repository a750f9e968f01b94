// tests/unit/search-test.cc

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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "dtw-oracle.h"
#include "qbe/errors.h"
#include "qbe/search.h"
#include "test-util.h"

namespace qbe {
namespace {

FeatureMatrix Rows(const std::string &id, const std::vector<std::vector<float>> &rows) {
  FeatureMatrix f(id, rows.size(), rows[0].size());
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t k = 0; k < rows[t].size(); ++k) f(t, k) = rows[t][k];
  return f;
}

TEST(Similarity, ClosedFormCases) {
  auto q = Rows("q", {{1, 2, 3}, {1, 0, 0}, {0, 0, 0}});
  auto d = Rows("d", {{2, 4, 6}, {0, 1, 0}, {-1, -2, -3}});
  std::size_t zeros = 0;
  auto s = Similarity(q, d, &zeros);
  ASSERT_EQ(s.rows, 3u);
  ASSERT_EQ(s.cols, 3u);
  EXPECT_NEAR(s(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(s(0, 2), 0.0, 1e-12);
  EXPECT_NEAR(s(1, 1), 0.5, 1e-12);
  for (int j = 0; j < 3; ++j) EXPECT_EQ(s(2, j), 0.5);
  EXPECT_EQ(zeros, 1u);
}

TEST(Similarity, RangeAndDimensionCheck) {
  Rng rng(1);
  auto q = testing::RandomMatrix("q", 7, 5, rng);
  auto d = testing::RandomMatrix("d", 9, 5, rng);
  auto s = Similarity(q, d);
  for (double v : s.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_THROW(Similarity(q, testing::RandomMatrix("e", 3, 4, rng)), DataError);
}

TEST(Dtw, SingleFrameQueryTakesMaximum) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    auto s = testing::RandomSimilarity(1, rng.Int(1, 30), rng);
    auto r = DtwSubsequence(s);
    EXPECT_EQ(r.score, *std::max_element(s.values.begin(), s.values.end()));
    EXPECT_EQ(r.path.size(), 1u);
  }
}

TEST(Dtw, ConstantMatrix) {
  SimilarityMatrix s{4, 7, std::vector<double>(28, 0.375)};
  auto r = DtwSubsequence(s);
  EXPECT_EQ(r.score, 0.375);
  auto again = DtwSubsequence(s);
  EXPECT_EQ(again.path, r.path);
}

TEST(Dtw, ExactCopyScoresOne) {
  SimilarityMatrix s{3, 6, std::vector<double>(18, 0.2)};
  s(0, 2) = s(1, 3) = s(2, 4) = 1.0;
  auto r = DtwSubsequence(s);
  EXPECT_EQ(r.score, 1.0);
  EXPECT_EQ(r.doc_start, 2);
  EXPECT_EQ(r.doc_end, 4);
}

TEST(Dtw, MatchesTopDownOracle) {
  Rng rng(3);
  for (int seed = 0; seed < 100; ++seed) {
    for (auto [m, n] : {std::pair{3, 4}, std::pair{rng.Int(1, 4), rng.Int(1, 5)}}) {
      auto s = testing::RandomSimilarity(m, n, rng);
      for (int k : {1, 2, 3}) {
        auto o = testing::DtwOracle(s, k).Answer();
        if (!o.reachable) {
          EXPECT_GT(m, (k + 1) * n);
          EXPECT_THROW(DtwSubsequence(s, {k}), DataError);
          continue;
        }
        auto r = DtwSubsequence(s, {k});
        EXPECT_EQ(r.score, o.sum / o.len) << m << "x" << n << " k=" << k;
        EXPECT_EQ(r.path, o.path);
      }
    }
  }
}

TEST(Dtw, BoundedByGlobalOptimumAndLegal) {
  Rng rng(4);
  for (int seed = 0; seed < 100; ++seed) {
    const int m = rng.Int(1, 4), n = rng.Int(1, 5);
    auto s = testing::RandomSimilarity(m, n, rng);
    for (int k : {1, 2}) {
      if (m > (k + 1) * n) continue;
      auto r = DtwSubsequence(s, {k});
      double best = -1;
      testing::EnumeratePaths(s, k, [&](const std::vector<PathStep> &p) {
        best = std::max(best, testing::PathAverage(s, p));
      });
      EXPECT_LE(r.score, best + 1e-9);
      EXPECT_TRUE(testing::LegalPath(s, r.path, k));
      EXPECT_NEAR(testing::PathAverage(s, r.path), r.score, 1e-9);
      EXPECT_EQ(r.doc_start, r.path.front().j);
      EXPECT_EQ(r.doc_end, r.path.back().j);
    }
  }
}

TEST(Dtw, LargerMatricesRealiseTheirScore) {
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    auto s = testing::RandomSimilarity(rng.Int(5, 40), rng.Int(5, 200), rng);
    auto r = DtwSubsequence(s);
    EXPECT_TRUE(testing::LegalPath(s, r.path, 2));
    EXPECT_NEAR(testing::PathAverage(s, r.path), r.score, 1e-9);
    EXPECT_GE(r.score, 0.0);
    EXPECT_LE(r.score, 1.0);
  }
}

SimilarityMatrix DuplicateColumns(const SimilarityMatrix &s) {
  SimilarityMatrix dup{s.rows, 2 * s.cols, std::vector<double>(2 * s.values.size())};
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) dup(i, 2 * j) = dup(i, 2 * j + 1) = s(i, j);
  return dup;
}

TEST(Dtw, DuplicatedColumnsKeepUnconstrainedOptimum) {
  // Without a slope limit every path maps onto the duplicated matrix with
  // the same average, so the best average cannot drop.
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const int m = rng.Int(1, 4), n = rng.Int(1, 4);
    auto s = testing::RandomSimilarity(m, n, rng);
    auto dup = DuplicateColumns(s);
    const int k = 4 * n + m;
    double orig = -1, doubled = -1;
    testing::EnumeratePaths(s, k, [&](const std::vector<PathStep> &p) {
      orig = std::max(orig, testing::PathAverage(s, p));
    });
    testing::EnumeratePaths(dup, k, [&](const std::vector<PathStep> &p) {
      doubled = std::max(doubled, testing::PathAverage(dup, p));
    });
    EXPECT_GE(doubled, orig - 1e-12);
  }
}

TEST(Dtw, DuplicatedColumnsFollowTheRecurrence) {
  // The greedy recurrence can score a column-duplicated matrix lower than
  // the original; the oracle must agree on both.
  Rng rng(7);
  int lower = 0;
  for (int t = 0; t < 500; ++t) {
    const int m = rng.Int(1, 5), n = rng.Int(2, 8);
    auto s = testing::RandomSimilarity(m, n, rng);
    if (m > 3 * n) continue;
    auto dup = DuplicateColumns(s);
    auto a = DtwSubsequence(s), b = DtwSubsequence(dup);
    auto oa = testing::DtwOracle(s, 2).Answer(), ob = testing::DtwOracle(dup, 2).Answer();
    EXPECT_EQ(a.score, oa.sum / oa.len);
    EXPECT_EQ(b.score, ob.sum / ob.len);
    lower += b.score < a.score;
  }
  EXPECT_LT(lower, 100);
}

TEST(Dtw, UnreachableLastRowThrows) {
  // With one column the query can only advance vertically, k frames at most.
  SimilarityMatrix s{4, 1, std::vector<double>(4, 0.5)};
  EXPECT_THROW(DtwSubsequence(s, {2}), DataError);
  EXPECT_NO_THROW(DtwSubsequence(s, {3}));
  EXPECT_THROW(DtwSubsequence(s, {0}), ConfigError);
  EXPECT_THROW(DtwSubsequence(SimilarityMatrix{}, {2}), DataError);
}

TEST(SearchAll, OneEntryPerPair) {
  Rng rng(7);
  std::vector<FeatureMatrix> q = {testing::RandomMatrix("q1", 5, 4, rng),
                                  testing::RandomMatrix("q2", 3, 4, rng)};
  std::vector<FeatureMatrix> d = {testing::RandomMatrix("d1", 20, 4, rng),
                                  testing::RandomMatrix("d2", 9, 4, rng),
                                  testing::RandomMatrix("d3", 30, 4, rng)};
  SearchTiming timing;
  auto table = SearchAll(q, d, {}, &timing);
  EXPECT_EQ(table.size(), 6u);
  EXPECT_EQ(timing.pairs, 6u);
  for (const auto &[key, score] : table.entries) {
    EXPECT_GE(score, 0.0);
    EXPECT_LE(score, 1.0);
  }
  EXPECT_EQ(table.entries.at({"q2", "d3"}),
            DtwSubsequence(Similarity(q[1], d[2])).score);
  EXPECT_THROW(SearchAll({}, d), DataError);
  std::vector<FeatureMatrix> long_query = {testing::RandomMatrix("long", 10, 4, rng)};
  std::vector<FeatureMatrix> short_doc = {testing::RandomMatrix("short", 3, 4, rng)};
  EXPECT_EQ(SearchAll(long_query, short_doc, {{}, 2}).entries.at({"long", "short"}), 0.0);
  std::vector<FeatureMatrix> bad_dims = {testing::RandomMatrix("bad", 5, 3, rng)};
  EXPECT_THROW(SearchAll(q, bad_dims, {{}, 2}), DataError);
  EXPECT_THROW(SearchAll(q, {}), DataError);
}

TEST(SearchAll, ThreadCountDoesNotChangeResults) {
  Rng rng(8);
  std::vector<FeatureMatrix> q, d;
  for (int i = 0; i < 6; ++i) q.push_back(testing::RandomMatrix("q" + std::to_string(i), 8, 6, rng));
  for (int i = 0; i < 9; ++i) d.push_back(testing::RandomMatrix("d" + std::to_string(i), 40, 6, rng));
  auto one = SearchAll(q, d, {{}, 1});
  for (int threads : {2, 3, 8}) {
    auto many = SearchAll(q, d, {{}, threads});
    EXPECT_EQ(many.entries, one.entries);
  }
  EXPECT_EQ(SearchAll(q, d, {{}, 1}).entries, one.entries);
}

TEST(SearchAll, PlantedCopyRanksFirst) {
  Rng rng(9);
  int wins = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto query = testing::RandomMatrix("q", rng.Int(5, 15), 16, rng);
    std::vector<FeatureMatrix> docs;
    const int planted = rng.Int(0, 4);
    for (int k = 0; k < 5; ++k) {
      auto d = testing::RandomMatrix("d" + std::to_string(k), 80, 16, rng);
      if (k == planted) {
        const int at = rng.Int(0, 80 - static_cast<int>(query.frames()));
        for (std::size_t t = 0; t < query.frames(); ++t)
          for (std::size_t c = 0; c < 16; ++c) d(at + t, c) = query(t, c);
      }
      docs.push_back(d);
    }
    auto table = SearchAll({query}, docs);
    const double target = table.entries.at({"q", "d" + std::to_string(planted)});
    bool best = true;
    for (const auto &[key, score] : table.entries) best &= score <= target;
    wins += best;
  }
  EXPECT_GE(wins, 90);
}

TEST(ScoreTable, DuplicatePairThrows) {
  ScoreTable t;
  t.Add("q", "d", 0.5);
  EXPECT_THROW(t.Add("q", "d", 0.6), DataError);
  t.Add("q", "e", 0.1);
  t.Add("p", "d", 0.1);
  EXPECT_EQ(t.QueryIds(), (std::vector<std::string>{"p", "q"}));
}

TEST(ScoreTable, FileFormatAndRoundTrip) {
  testing::TempDir dir;
  ScoreTable t;
  t.Add("q1", "d2", 0.1234567);
  t.Add("q1", "d1", 1.0);
  t.Add("q0", "d1", -0.5);
  WriteScores(t, dir.File("s.tsv"));
  std::ifstream is(dir.File("s.tsv"));
  std::string text((std::istreambuf_iterator<char>(is)), {});
  EXPECT_EQ(text, "q0\td1\t-0.500000\nq1\td1\t1.000000\nq1\td2\t0.123457\n");
  auto back = ReadScores(dir.File("s.tsv"));
  EXPECT_EQ(back.size(), 3u);
  EXPECT_DOUBLE_EQ(back.entries.at({"q1", "d2"}), 0.123457);
  WriteScores(back, dir.File("again.tsv"));
  std::ifstream is2(dir.File("again.tsv"));
  EXPECT_EQ(std::string((std::istreambuf_iterator<char>(is2)), {}), text);
}

TEST(ScoreTable, MalformedFilesThrow) {
  testing::TempDir dir;
  {
    std::ofstream os(dir.File("bad.tsv"));
    os << "q1\td1\tnot-a-number\n";
  }
  EXPECT_THROW(ReadScores(dir.File("bad.tsv")), DataError);
  {
    std::ofstream os(dir.File("dup.tsv"));
    os << "q1\td1\t0.5\nq1\td1\t0.6\n";
  }
  EXPECT_THROW(ReadScores(dir.File("dup.tsv")), DataError);
}

}  // namespace
}  // namespace qbe
