// core/include/qbe/eval.h

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

#ifndef QBE_EVAL_H_
#define QBE_EVAL_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qbe/score-table.h"

namespace qbe {

struct TrialLabels {
  std::map<TrialKey, bool> entries;  // true = target

  std::size_t size() const { return entries.size(); }
  std::size_t NumTargets() const;
  // Throws DataError if the pair is already present.
  void Add(const std::string &query, const std::string &doc, bool target);
};

// TSV "query_id<TAB>doc_id<TAB>{0|1}".
TrialLabels ReadLabels(const std::string &path);
void WriteLabels(const TrialLabels &labels, const std::string &path);

enum class MtwvMode { kPooled, kPerQueryAveraged };
enum class Calibration { kPav, kAffine };

struct EvalConfig {
  double cost_false_alarm = 1.0;
  double cost_miss = 100.0;
  std::optional<double> target_prior;  // empirical target rate when unset
  MtwvMode mtwv_mode = MtwvMode::kPooled;
  Calibration calibration = Calibration::kPav;

  // Throws ConfigError on non-positive costs or a prior outside (0, 1).
  void Validate() const;
};

// One scored and labelled trial.
struct Trial {
  double score = 0.0;
  bool target = false;
};

// Joins scores with labels. Throws DataError on a scored pair without a
// label, DegenerateError without at least one target and one nontarget.
std::vector<Trial> CollectTrials(const ScoreTable &scores, const TrialLabels &labels);

double EffectivePrior(const std::vector<Trial> &trials, const EvalConfig &cfg);
double Beta(const EvalConfig &cfg, double prior);

// Per-query zero-mean, unit sample-variance normalisation. Queries with fewer
// than two documents or zero variance get all-zero scores and a warning;
// their ids are appended to *flagged when given.
ScoreTable Znorm(const ScoreTable &raw, std::vector<std::string> *flagged = nullptr);

struct DetPoint {
  double threshold = 0.0;  // +inf for the reject-all point
  double p_fa = 0.0;
  double p_miss = 0.0;
};

// One point per distinct score plus the reject-all point, thresholds
// ascending.
std::vector<DetPoint> Det(const std::vector<Trial> &trials);
std::vector<DetPoint> Det(const ScoreTable &scores, const TrialLabels &labels);

struct MtwvResult {
  double mtwv = 0.0;
  double threshold = 0.0;
};

MtwvResult Mtwv(const std::vector<Trial> &trials, const EvalConfig &cfg);
MtwvResult Mtwv(const ScoreTable &scores, const TrialLabels &labels, const EvalConfig &cfg);

// Normalised cross entropy after the calibration selected by cfg.
double CnxeMin(const std::vector<Trial> &trials, const EvalConfig &cfg);

// Smoothed pool-adjacent-violators posteriors, in the order of trials.
std::vector<double> PavPosteriors(const std::vector<Trial> &trials);

// Normalised cross entropy of explicit target posteriors.
double Cnxe(const std::vector<Trial> &trials, const std::vector<double> &posteriors,
            double prior);

struct CnxeResult {
  double cnxe_min = 0.0;
  std::map<std::string, double> per_query;  // queries with both classes only
};

CnxeResult CnxeMin(const ScoreTable &scores, const TrialLabels &labels, const EvalConfig &cfg);

struct TTestResult {
  double t = 0.0;
  double p = 0.0;  // upper tail
  int df = 0;
};

// Tests mean(a - b) > 0. Throws DataError on length mismatch or fewer than two
// pairs, DegenerateError on zero-variance differences.
TTestResult PairedTTestOneTailed(const std::vector<double> &a, const std::vector<double> &b);

struct MetricReport {
  double cnxe_min = 0.0;
  double mtwv = 0.0;
  double mtwv_threshold = 0.0;
  std::vector<DetPoint> det_points;
  std::map<std::string, double> per_query_cnxe;
  std::size_t num_targets = 0;
  std::size_t num_nontargets = 0;
  double prior = 0.0;
  bool prior_configured = false;
  double beta = 0.0;
  MtwvMode mtwv_mode = MtwvMode::kPooled;
  Calibration calibration = Calibration::kPav;
};

MetricReport Evaluate(const ScoreTable &scores, const TrialLabels &labels,
                      const EvalConfig &cfg = {});

void WriteReport(const MetricReport &report, const std::string &path);
// Restores scalar fields and per-query values; DET points are not stored.
MetricReport ReadReport(const std::string &path);

// TSV "p_fa<TAB>p_miss" sorted by p_fa ascending.
void WriteDet(const std::vector<DetPoint> &points, const std::string &path);
std::vector<DetPoint> ReadDet(const std::string &path);

struct CompareResult {
  TTestResult test;
  std::size_t queries = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
};

// Paired test of per-query cnxe, a against b. Positive t means a has the
// higher cross entropy. Throws DataError when the query sets differ.
CompareResult CompareRuns(const MetricReport &a, const MetricReport &b);

}  // namespace qbe

#endif  // QBE_EVAL_H_
