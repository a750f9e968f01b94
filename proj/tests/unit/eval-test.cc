// tests/unit/eval-test.cc

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
#include <limits>

#include "qbe/errors.h"
#include "qbe/eval.h"
#include "test-util.h"

namespace qbe {
namespace {

std::vector<Trial> FourTrials() {
  return {{0.9, true}, {0.2, true}, {0.5, false}, {0.1, false}};
}

// TWV evaluated straight from its definition at threshold th.
double TwvAt(const std::vector<Trial> &trials, double th, double beta) {
  double targets = 0, nontargets = 0, miss = 0, fa = 0;
  for (const auto &t : trials) {
    if (t.target) {
      ++targets;
      miss += t.score < th;
    } else {
      ++nontargets;
      fa += t.score >= th;
    }
  }
  return 1.0 - miss / targets - beta * fa / nontargets;
}

// Maximum TWV over thresholds below, between and above all scores.
double BruteForceMtwv(const std::vector<Trial> &trials, double beta) {
  std::vector<double> s;
  for (const auto &t : trials) s.push_back(t.score);
  std::sort(s.begin(), s.end());
  std::vector<double> th = {s.front() - 1.0, s.back() + 1.0};
  for (std::size_t i = 0; i + 1 < s.size(); ++i) th.push_back(0.5 * (s[i] + s[i + 1]));
  double best = -std::numeric_limits<double>::infinity();
  for (double t : th) best = std::max(best, TwvAt(trials, t, beta));
  return best;
}

std::vector<Trial> RandomTrials(std::size_t n, double separation, Rng &rng, int levels = 0) {
  std::vector<Trial> trials;
  for (std::size_t i = 0; i < n; ++i) {
    bool target = i % 3 == 0;
    double s = rng.Normal(target ? separation : 0.0, 1.0);
    if (levels > 0) s = std::round(s * levels) / levels;
    trials.push_back({s, target});
  }
  return trials;
}

void ToTable(const std::vector<Trial> &trials, ScoreTable *scores, TrialLabels *labels,
             int queries = 1) {
  for (std::size_t i = 0; i < trials.size(); ++i) {
    std::string q = "q" + std::to_string(i % queries);
    std::string d = "d" + std::to_string(i);
    scores->Add(q, d, trials[i].score);
    labels->Add(q, d, trials[i].target);
  }
}

TEST(Znorm, ThreeScores) {
  ScoreTable raw;
  raw.Add("q", "a", 1);
  raw.Add("q", "b", 2);
  raw.Add("q", "c", 3);
  auto z = Znorm(raw);
  EXPECT_EQ(z.state, ScoreTable::State::kZnormed);
  EXPECT_NEAR(z.entries.at({"q", "a"}), -1.0, 1e-12);
  EXPECT_NEAR(z.entries.at({"q", "b"}), 0.0, 1e-12);
  EXPECT_NEAR(z.entries.at({"q", "c"}), 1.0, 1e-12);
}

TEST(Znorm, MomentsAndRanking) {
  Rng rng(1);
  ScoreTable raw;
  for (int q = 0; q < 5; ++q)
    for (int d = 0; d < 2 + q * 7; ++d)
      raw.Add("q" + std::to_string(q), "d" + std::to_string(d), rng.Uniform(0.3, 0.9));
  auto z = Znorm(raw);
  for (const auto &query : raw.QueryIds()) {
    std::vector<double> before, after;
    for (const auto &[key, v] : raw.entries)
      if (key.first == query) {
        before.push_back(v);
        after.push_back(z.entries.at(key));
      }
    double mean = 0, ss = 0;
    for (double v : after) mean += v / after.size();
    for (double v : after) ss += (v - mean) * (v - mean);
    EXPECT_LT(std::abs(mean), 1e-9);
    EXPECT_NEAR(std::sqrt(ss / (after.size() - 1)), 1.0, 1e-9);
    for (std::size_t i = 0; i < before.size(); ++i)
      for (std::size_t j = 0; j < before.size(); ++j)
        if (before[i] < before[j]) EXPECT_LT(after[i], after[j]);
  }
}

TEST(Znorm, QueriesAreIndependent) {
  ScoreTable a, b;
  const double q1[] = {0.1, 0.7, 0.4, 0.9};
  const double q2[] = {0.3, 0.2, 0.8};
  for (int d = 0; d < 4; ++d) {
    a.Add("q1", "d" + std::to_string(d), q1[d]);
    b.Add("q1", "d" + std::to_string(d), q1[d]);
  }
  for (int d = 0; d < 3; ++d) {
    a.Add("q2", "d" + std::to_string(d), q2[d]);
    b.Add("q2", "d" + std::to_string(d), q2[(d + 1) % 3]);
  }
  auto za = Znorm(a), zb = Znorm(b);
  for (int d = 0; d < 4; ++d) {
    std::string id = "d" + std::to_string(d);
    EXPECT_EQ(za.entries.at({"q1", id}), zb.entries.at({"q1", id}));
  }
}

TEST(Znorm, DegenerateQueriesAreZeroedAndFlagged) {
  ScoreTable raw;
  raw.Add("single", "a", 0.7);
  raw.Add("flat", "a", 0.4);
  raw.Add("flat", "b", 0.4);
  raw.Add("ok", "a", 0.1);
  raw.Add("ok", "b", 0.2);
  std::vector<std::string> flagged;
  auto z = Znorm(raw, &flagged);
  EXPECT_EQ(z.entries.at({"single", "a"}), 0.0);
  EXPECT_EQ(z.entries.at({"flat", "b"}), 0.0);
  EXPECT_NE(z.entries.at({"ok", "b"}), 0.0);
  std::sort(flagged.begin(), flagged.end());
  EXPECT_EQ(flagged, (std::vector<std::string>{"flat", "single"}));
}

TEST(Det, FourTrialSweep) {
  auto points = Det(FourTrials());
  ASSERT_EQ(points.size(), 5u);
  bool found = false;
  for (const auto &p : points)
    if (p.threshold == 0.5) {
      EXPECT_DOUBLE_EQ(p.p_fa, 0.5);
      EXPECT_DOUBLE_EQ(p.p_miss, 0.5);
      found = true;
    }
  EXPECT_TRUE(found);
  EXPECT_TRUE(std::isinf(points.back().threshold));
  EXPECT_EQ(points.back().p_fa, 0.0);
  EXPECT_EQ(points.back().p_miss, 1.0);
}

TEST(Det, PerfectSeparationReachesOrigin) {
  std::vector<Trial> t = {{0.9, true}, {0.8, true}, {0.3, false}, {0.1, false}, {0.2, false}};
  bool origin = false;
  for (const auto &p : Det(t)) origin |= p.p_fa == 0.0 && p.p_miss == 0.0;
  EXPECT_TRUE(origin);
}

TEST(Det, ConstantScoresGiveCorners) {
  Rng rng(2);
  std::vector<Trial> t;
  for (int i = 0; i < 20; ++i) t.push_back({0.42, rng.Bernoulli(0.5) || i == 0 ? i != 1 : false});
  auto points = Det(t);
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[0].p_fa, 1.0);
  EXPECT_EQ(points[0].p_miss, 0.0);
  EXPECT_EQ(points[1].p_fa, 0.0);
  EXPECT_EQ(points[1].p_miss, 1.0);
}

TEST(Det, Staircase) {
  Rng rng(3);
  auto points = Det(RandomTrials(200, 1.0, rng, 5));
  for (std::size_t i = 1; i < points.size(); ++i) {
    EXPECT_GT(points[i].threshold, points[i - 1].threshold);
    EXPECT_LE(points[i].p_fa, points[i - 1].p_fa);
    EXPECT_GE(points[i].p_miss, points[i - 1].p_miss);
  }
  EXPECT_EQ(points.front().p_fa, 1.0);
  EXPECT_EQ(points.front().p_miss, 0.0);
}

TEST(Det, NeedsBothClasses) {
  std::vector<Trial> only_targets = {{0.5, true}, {0.4, true}};
  ScoreTable s;
  TrialLabels l;
  ToTable(only_targets, &s, &l);
  EXPECT_THROW(Det(s, l), DegenerateError);
  s.Add("q9", "unlabelled", 0.1);
  EXPECT_THROW(Det(s, l), DataError);
}

TEST(Mtwv, PerfectSeparationIsOne) {
  std::vector<Trial> t = {{0.9, true}, {0.8, true}, {0.3, false}, {0.1, false}};
  auto r = Mtwv(t, {});
  EXPECT_DOUBLE_EQ(r.mtwv, 1.0);
  EXPECT_EQ(r.threshold, 0.8);
}

TEST(Mtwv, FourTrialExampleMatchesSweep) {
  EvalConfig cfg;
  cfg.target_prior = 0.5;
  EXPECT_DOUBLE_EQ(Beta(cfg, 0.5), 0.01);
  auto r = Mtwv(FourTrials(), cfg);
  // Accepting everything at or above 0.2 misses nothing and lets one of two
  // nontargets through: 1 - 0 - 0.01 * 0.5.
  EXPECT_NEAR(TwvAt(FourTrials(), 0.5, 0.01), 0.495, 1e-12);
  EXPECT_NEAR(TwvAt(FourTrials(), 0.9, 0.01), 0.5, 1e-12);
  EXPECT_NEAR(BruteForceMtwv(FourTrials(), 0.01), 0.995, 1e-12);
  EXPECT_NEAR(r.mtwv, 0.995, 1e-12);
  EXPECT_EQ(r.threshold, 0.2);
}

TEST(Mtwv, MatchesMidpointBruteForce) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto t = RandomTrials(rng.Int(6, 80), rng.Uniform(0.0, 3.0), rng, trial % 2 ? 4 : 0);
    for (double prior : {0.01, 0.2, 0.5}) {
      EvalConfig cfg;
      cfg.target_prior = prior;
      auto r = Mtwv(t, cfg);
      EXPECT_NEAR(r.mtwv, BruteForceMtwv(t, Beta(cfg, prior)), 1e-12);
      EXPECT_NEAR(TwvAt(t, r.threshold, Beta(cfg, prior)), r.mtwv, 1e-12);
      EXPECT_LE(r.mtwv, 1.0);
      EXPECT_GE(r.mtwv, 0.0);
    }
  }
}

TEST(Mtwv, TiesPickSmallestThreshold) {
  // Thresholds 0.3 and 0.5 both accept exactly the target.
  std::vector<Trial> t = {{0.2, false}, {0.6, true}};
  EvalConfig cfg;
  auto r = Mtwv(t, cfg);
  EXPECT_DOUBLE_EQ(r.mtwv, 1.0);
  EXPECT_EQ(r.threshold, 0.6);
  std::vector<Trial> u = {{0.2, false}, {0.4, false}, {0.6, true}, {0.6, false}};
  cfg.cost_false_alarm = 0.0 + 1e-300;
  EXPECT_EQ(Mtwv(u, cfg).threshold, 0.2);
}

TEST(Mtwv, PerQueryAveragedMode) {
  // q1: target 0.9, nontarget 0.1; q2: target 0.3, nontarget 0.5.
  ScoreTable s;
  TrialLabels l;
  s.Add("q1", "a", 0.9), l.Add("q1", "a", true);
  s.Add("q1", "b", 0.1), l.Add("q1", "b", false);
  s.Add("q2", "a", 0.3), l.Add("q2", "a", true);
  s.Add("q2", "b", 0.5), l.Add("q2", "b", false);
  EvalConfig cfg;
  cfg.mtwv_mode = MtwvMode::kPerQueryAveraged;
  const double beta = Beta(cfg, 0.5);
  // Threshold 0.3 accepts both targets and q2's nontarget:
  // 1 - 0 - beta * (0 + 1) / 2.
  auto r = Mtwv(s, l, cfg);
  EXPECT_NEAR(r.mtwv, 1.0 - beta / 2, 1e-12);
  EXPECT_EQ(r.threshold, 0.3);
}

TEST(Cnxe, SeparatedScoresNearZero) {
  std::vector<Trial> t;
  for (int i = 0; i < 50; ++i) t.push_back({1.0 + i, true});
  for (int i = 0; i < 50; ++i) t.push_back({-1.0 - i, false});
  // Two pooled blocks with smoothed rates 50.5 / 51 and 0.5 / 51 at prior 0.5.
  const double expect = -std::log2(50.5 / 51.0);
  double v = CnxeMin(t, {});
  EXPECT_NEAR(v, expect, 1e-12);
  EXPECT_LE(v, 0.05);
}

TEST(Cnxe, ConstantScoresNearOne) {
  Rng rng(5);
  for (double rate : {0.5, 0.1, 0.03}) {
    std::vector<Trial> t;
    for (int i = 0; i < 300; ++i) t.push_back({0.7, i < rate * 300});
    double v = CnxeMin(t, {});
    EXPECT_NEAR(v, 1.0, 0.05) << rate;
  }
}

TEST(Cnxe, InvariantUnderExp) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = RandomTrials(150, 1.0, rng, trial % 2 ? 3 : 0);
    auto e = t;
    for (auto &x : e) x.score = std::exp(x.score);
    EXPECT_NEAR(CnxeMin(t, {}), CnxeMin(e, {}), 1e-12);
  }
}

TEST(Cnxe, PavNotWorseThanAffineOnOverlappingScores) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto t = RandomTrials(300, rng.Uniform(0.2, 1.5), rng);
    EvalConfig affine;
    affine.calibration = Calibration::kAffine;
    EXPECT_LE(CnxeMin(t, {}), CnxeMin(t, affine) + 1e-12);
  }
}

// Isotonic fit from the max-min formula over tie groups, then the same
// smoothing per level set.
std::vector<double> OraclePav(const std::vector<Trial> &trials) {
  std::map<double, std::pair<double, double>> groups;  // score -> (targets, count)
  for (const auto &t : trials) {
    groups[t.score].first += t.target;
    groups[t.score].second += 1;
  }
  std::vector<std::pair<double, double>> g;
  std::vector<double> keys;
  for (const auto &[s, tc] : groups) {
    keys.push_back(s);
    g.push_back(tc);
  }
  const std::size_t n = g.size();
  std::vector<double> fit(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -1;
    for (std::size_t a = 0; a <= i; ++a) {
      double worst = 2;
      for (std::size_t b = i; b < n; ++b) {
        double tt = 0, cc = 0;
        for (std::size_t k = a; k <= b; ++k) tt += g[k].first, cc += g[k].second;
        worst = std::min(worst, tt / cc);
      }
      best = std::max(best, worst);
    }
    fit[i] = best;
  }
  std::map<double, double> smoothed;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    double tt = 0, cc = 0;
    while (j < n && std::abs(fit[j] - fit[i]) < 1e-12) tt += g[j].first, cc += g[j].second, ++j;
    for (std::size_t k = i; k < j; ++k) smoothed[keys[k]] = (tt + 0.5) / (cc + 1.0);
    i = j;
  }
  std::vector<double> out;
  for (const auto &t : trials) out.push_back(smoothed[t.score]);
  return out;
}

TEST(Pav, HandExample) {
  std::vector<Trial> t = {{1, true}, {2, false}, {3, true}, {4, true}};
  auto p = PavPosteriors(t);
  EXPECT_DOUBLE_EQ(p[0], 1.5 / 3.0);
  EXPECT_DOUBLE_EQ(p[1], 1.5 / 3.0);
  EXPECT_DOUBLE_EQ(p[2], 2.5 / 3.0);
  EXPECT_DOUBLE_EQ(p[3], 2.5 / 3.0);
}

TEST(Pav, MatchesMaxMinOracle) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto t = RandomTrials(rng.Int(2, 40), rng.Uniform(0.0, 2.0), rng, trial % 3 ? 2 : 0);
    auto got = PavPosteriors(t), want = OraclePav(t);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Cnxe, ConfiguredPriorShiftsPosteriors) {
  Rng rng(9);
  auto t = RandomTrials(90, 1.0, rng);
  EvalConfig cfg;
  cfg.target_prior = 1.0 / 3.0;  // equals the empirical rate
  EXPECT_NEAR(CnxeMin(t, cfg), CnxeMin(t, {}), 1e-12);
  cfg.target_prior = 0.05;
  double v = CnxeMin(t, cfg);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(v, 0.0);
}

TEST(Cnxe, PerQueryValuesSkipSingleClassQueries) {
  Rng rng(10);
  auto t = RandomTrials(60, 1.0, rng);
  ScoreTable s;
  TrialLabels l;
  ToTable(t, &s, &l, 3);  // query q0 holds every target
  s.Add("q9", "x", 0.1), l.Add("q9", "x", false);
  s.Add("q9", "y", 0.9), l.Add("q9", "y", true);
  auto r = CnxeMin(s, l, {});
  EXPECT_EQ(r.per_query.count("q0"), 0u);
  EXPECT_EQ(r.per_query.count("q1"), 0u);
  ASSERT_EQ(r.per_query.count("q9"), 1u);
}

TEST(Config, RejectsBadValues) {
  EvalConfig cfg;
  cfg.target_prior = 1.0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  cfg.target_prior = 0.2;
  cfg.cost_miss = 0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
}

// Upper tail of Student's t by composite Simpson integration of the density
// from 0 to t.
double SimpsonUpperTail(double t, int df) {
  auto density = [df](double x) {
    double c = std::exp(std::lgamma((df + 1) / 2.0) - std::lgamma(df / 2.0)) /
               std::sqrt(df * std::acos(-1.0));
    return c * std::pow(1 + x * x / df, -(df + 1) / 2.0);
  };
  const int n = 20000;
  const double h = t / n;
  double s = density(0) + density(t);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * density(i * h);
  return 0.5 - s * h / 3;
}

TEST(TTest, ThreeDifferences) {
  auto r = PairedTTestOneTailed({2, 3, 4}, {1, 1, 1});
  EXPECT_EQ(r.df, 2);
  EXPECT_NEAR(r.t, 2.0 * std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(r.t, 3.4641, 1e-3);
  EXPECT_NEAR(r.p, SimpsonUpperTail(r.t, 2), 1e-9);
  EXPECT_NEAR(r.p, 0.0371, 5e-3);
}

TEST(TTest, MatchesIntegrationForOtherSizes) {
  Rng rng(11);
  for (int n : {4, 7, 15, 40}) {
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = rng.Normal(0.3, 1.0);
      b[i] = rng.Normal(0.0, 1.0);
    }
    auto r = PairedTTestOneTailed(a, b);
    double tail = SimpsonUpperTail(std::abs(r.t), r.df);
    EXPECT_NEAR(r.p, r.t > 0 ? tail : 1.0 - tail, 1e-8);
    auto flipped = PairedTTestOneTailed(b, a);
    EXPECT_NEAR(flipped.t, -r.t, 1e-12);
    EXPECT_NEAR(flipped.p, 1.0 - r.p, 1e-12);
  }
}

TEST(TTest, DegenerateInputs) {
  EXPECT_THROW(PairedTTestOneTailed({1, 2, 3}, {1, 2, 3}), DegenerateError);
  EXPECT_THROW(PairedTTestOneTailed({2, 3, 4, 5}, {1, 2, 3, 4}), DegenerateError);
  EXPECT_THROW(PairedTTestOneTailed({1, 2}, {1}), DataError);
  EXPECT_THROW(PairedTTestOneTailed({1}, {0}), DataError);
}

TEST(Files, DetFileForPerfectSystem) {
  testing::TempDir dir;
  std::vector<Trial> t = {{0.9, true}, {0.1, false}};
  ScoreTable s;
  TrialLabels l;
  ToTable(t, &s, &l);
  auto points = Det(s, l);
  EXPECT_EQ(points.size(), 3u);  // two distinct scores plus reject-all
  WriteDet(points, dir.File("det.tsv"));
  std::ifstream is(dir.File("det.tsv"));
  std::string text((std::istreambuf_iterator<char>(is)), {});
  EXPECT_NE(text.find("0.000000\t0.000000\n"), std::string::npos);
  EXPECT_EQ(text.substr(0, 9), "0.000000\t");
}

TEST(Files, DetRoundTrip) {
  testing::TempDir dir;
  Rng rng(12);
  auto points = Det(RandomTrials(77, 0.8, rng));
  WriteDet(points, dir.File("det.tsv"));
  auto back = ReadDet(dir.File("det.tsv"));
  ASSERT_EQ(back.size(), points.size());
  auto sorted = points;
  std::stable_sort(sorted.begin(), sorted.end(), [](const DetPoint &a, const DetPoint &b) {
    return a.p_fa != b.p_fa ? a.p_fa < b.p_fa : a.p_miss < b.p_miss;
  });
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_NEAR(back[i].p_fa, sorted[i].p_fa, 5e-7);
    EXPECT_NEAR(back[i].p_miss, sorted[i].p_miss, 5e-7);
  }
}

TEST(Files, LabelsRoundTrip) {
  testing::TempDir dir;
  TrialLabels l;
  l.Add("q1", "d1", true);
  l.Add("q1", "d2", false);
  WriteLabels(l, dir.File("l.tsv"));
  auto back = ReadLabels(dir.File("l.tsv"));
  EXPECT_EQ(back.entries, l.entries);
  EXPECT_EQ(back.NumTargets(), 1u);
  {
    std::ofstream os(dir.File("bad.tsv"));
    os << "q1\td1\t2\n";
  }
  EXPECT_THROW(ReadLabels(dir.File("bad.tsv")), DataError);
}

MetricReport SampleReport(uint64_t seed, double shift) {
  Rng rng(seed);
  auto t = RandomTrials(240, 1.0 + shift, rng);
  ScoreTable s;
  TrialLabels l;
  ToTable(t, &s, &l, 8);
  return Evaluate(s, l);
}

TEST(Report, RoundTrip) {
  testing::TempDir dir;
  auto r = SampleReport(13, 0.0);
  EXPECT_EQ(r.num_targets + r.num_nontargets, 240u);
  EXPECT_EQ(r.per_query_cnxe.size(), 8u);
  WriteReport(r, dir.File("report.txt"));
  auto back = ReadReport(dir.File("report.txt"));
  EXPECT_NEAR(back.cnxe_min, r.cnxe_min, 5e-7);
  EXPECT_NEAR(back.mtwv, r.mtwv, 5e-7);
  EXPECT_NEAR(back.beta, r.beta, 5e-7);
  EXPECT_EQ(back.num_targets, r.num_targets);
  ASSERT_EQ(back.per_query_cnxe.size(), r.per_query_cnxe.size());
  for (const auto &[q, v] : r.per_query_cnxe) EXPECT_NEAR(back.per_query_cnxe.at(q), v, 1e-9);
  std::ifstream is(dir.File("report.txt"));
  std::string first;
  std::getline(is, first);
  EXPECT_EQ(first.rfind("# ", 0), 0u);
  EXPECT_NE(first.find("calibration=pav"), std::string::npos);
}

TEST(Compare, SelfIsDegenerateAndSwapFlipsSign) {
  auto a = SampleReport(14, 0.0), b = SampleReport(14, 1.0);
  EXPECT_THROW(CompareRuns(a, a), DegenerateError);
  auto ab = CompareRuns(a, b), ba = CompareRuns(b, a);
  EXPECT_EQ(ab.queries, 8u);
  EXPECT_NEAR(ab.test.t, -ba.test.t, 1e-12);
  EXPECT_GT(ab.mean_a, ab.mean_b);  // b is better separated
  EXPECT_GT(ab.test.t, 0.0);
  b.per_query_cnxe.erase(b.per_query_cnxe.begin());
  EXPECT_THROW(CompareRuns(a, b), DataError);
}

}  // namespace
}  // namespace qbe
