// core/src/eval.cc

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

#include "qbe/eval.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "qbe/errors.h"

namespace qbe {

std::size_t TrialLabels::NumTargets() const {
  std::size_t n = 0;
  for (const auto &[_, target] : entries) n += target;
  return n;
}

void TrialLabels::Add(const std::string &query, const std::string &doc, bool target) {
  if (!entries.emplace(TrialKey{query, doc}, target).second)
    throw DataError("duplicate label for pair (" + query + ", " + doc + ")");
}

TrialLabels ReadLabels(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  TrialLabels labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string q, d, v;
    if (!std::getline(ls, q, '\t') || !std::getline(ls, d, '\t') || !std::getline(ls, v) ||
        (v != "0" && v != "1"))
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected query<TAB>doc<TAB>{0|1}");
    labels.Add(q, d, v == "1");
  }
  return labels;
}

void WriteLabels(const TrialLabels &labels, const std::string &path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  for (const auto &[key, target] : labels.entries)
    os << key.first << '\t' << key.second << '\t' << (target ? '1' : '0') << '\n';
  if (!os) throw DataError("write failed for " + path);
}

void EvalConfig::Validate() const {
  if (!(cost_false_alarm > 0.0) || !(cost_miss > 0.0))
    throw ConfigError("eval: costs must be positive");
  if (target_prior && !(*target_prior > 0.0 && *target_prior < 1.0))
    throw ConfigError("eval: target_prior must lie in (0, 1)");
}

namespace {

void CheckBothClasses(const std::vector<Trial> &trials) {
  std::size_t targets = 0;
  for (const auto &t : trials) targets += t.target;
  if (targets == 0) throw DegenerateError("evaluation needs at least one target trial");
  if (targets == trials.size())
    throw DegenerateError("evaluation needs at least one nontarget trial");
}

std::size_t CountTargets(const std::vector<Trial> &trials) {
  std::size_t n = 0;
  for (const auto &t : trials) n += t.target;
  return n;
}

double Entropy2(double p) { return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p); }

double Logit(double p) { return std::log(p) - std::log1p(-p); }

double Sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

struct SortedClasses {
  std::vector<double> targets, nontargets;
};

SortedClasses Split(const std::vector<Trial> &trials) {
  SortedClasses s;
  for (const auto &t : trials) (t.target ? s.targets : s.nontargets).push_back(t.score);
  std::sort(s.targets.begin(), s.targets.end());
  std::sort(s.nontargets.begin(), s.nontargets.end());
  return s;
}

// Fraction of sorted values strictly below theta.
double FractionBelow(const std::vector<double> &sorted, double theta) {
  if (sorted.empty()) return 0.0;
  auto it = std::lower_bound(sorted.begin(), sorted.end(), theta);
  return static_cast<double>(it - sorted.begin()) / sorted.size();
}

std::vector<double> Thresholds(const std::vector<Trial> &trials) {
  std::vector<double> th;
  th.reserve(trials.size() + 1);
  for (const auto &t : trials) th.push_back(t.score);
  std::sort(th.begin(), th.end());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  th.push_back(std::numeric_limits<double>::infinity());
  return th;
}

std::vector<double> AffinePosteriors(const std::vector<Trial> &trials, double prior) {
  const double nt = CountTargets(trials), nn = trials.size() - nt;
  double mean = 0.0, var = 0.0;
  for (const auto &t : trials) mean += t.score;
  mean /= trials.size();
  for (const auto &t : trials) var += (t.score - mean) * (t.score - mean);
  const double scale = var > 0.0 ? std::sqrt(var / trials.size()) : 1.0;
  std::vector<double> x(trials.size()), w(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) {
    x[i] = (trials[i].score - mean) / scale;
    w[i] = trials[i].target ? prior / nt : (1.0 - prior) / nn;
  }
  auto loss = [&](double a, double b) {
    double l = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double z = a * x[i] + b;
      // -log sigma(z) for targets, -log(1 - sigma(z)) for nontargets
      double m = trials[i].target ? -z : z;
      l += w[i] * (m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m)));
    }
    return l;
  };
  double a = 0.0, b = Logit(prior);
  double current = loss(a, b);
  for (int iter = 0; iter < 100; ++iter) {
    double ga = 0, gb = 0, haa = 1e-12, hab = 0, hbb = 1e-12;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double p = Sigmoid(a * x[i] + b);
      double r = w[i] * (p - (trials[i].target ? 1.0 : 0.0));
      double h = w[i] * p * (1.0 - p);
      ga += r * x[i];
      gb += r;
      haa += h * x[i] * x[i];
      hab += h * x[i];
      hbb += h;
    }
    double det = haa * hbb - hab * hab;
    if (!(det > 0.0)) break;
    double da = (hbb * ga - hab * gb) / det, db = (haa * gb - hab * ga) / det;
    double step = 1.0;
    bool improved = false;
    for (int k = 0; k < 30; ++k, step *= 0.5) {
      double next = loss(a - step * da, b - step * db);
      if (next < current) {
        a -= step * da;
        b -= step * db;
        improved = current - next > 1e-15;
        current = next;
        break;
      }
    }
    if (!improved) break;
  }
  std::vector<double> post(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) post[i] = Sigmoid(a * x[i] + b);
  return post;
}

}  // namespace

std::vector<Trial> CollectTrials(const ScoreTable &scores, const TrialLabels &labels) {
  std::vector<Trial> trials;
  trials.reserve(scores.size());
  for (const auto &[key, score] : scores.entries) {
    auto it = labels.entries.find(key);
    if (it == labels.entries.end())
      throw DataError("no label for scored pair (" + key.first + ", " + key.second + ")");
    trials.push_back({score, it->second});
  }
  CheckBothClasses(trials);
  return trials;
}

double EffectivePrior(const std::vector<Trial> &trials, const EvalConfig &cfg) {
  if (cfg.target_prior) return *cfg.target_prior;
  return static_cast<double>(CountTargets(trials)) / trials.size();
}

double Beta(const EvalConfig &cfg, double prior) {
  return cfg.cost_false_alarm / cfg.cost_miss * (1.0 / prior - 1.0);
}

ScoreTable Znorm(const ScoreTable &raw, std::vector<std::string> *flagged) {
  ScoreTable out;
  out.state = ScoreTable::State::kZnormed;
  auto it = raw.entries.begin();
  while (it != raw.entries.end()) {
    auto end = it;
    std::size_t n = 0;
    double sum = 0.0;
    for (; end != raw.entries.end() && end->first.first == it->first.first; ++end, ++n)
      sum += end->second;
    const double mean = sum / n;
    double ss = 0.0;
    for (auto e = it; e != end; ++e) ss += (e->second - mean) * (e->second - mean);
    const double sd = n >= 2 ? std::sqrt(ss / (n - 1)) : 0.0;
    const bool degenerate = n < 2 || !(sd > 0.0);
    if (degenerate) {
      spdlog::warn("znorm: query '{}' has {} document(s) and sample std {}; scores set to 0",
                   it->first.first, n, sd);
      if (flagged) flagged->push_back(it->first.first);
    }
    for (auto e = it; e != end; ++e)
      out.entries.emplace(e->first, degenerate ? 0.0 : (e->second - mean) / sd);
    it = end;
  }
  return out;
}

std::vector<DetPoint> Det(const std::vector<Trial> &trials) {
  CheckBothClasses(trials);
  const auto cls = Split(trials);
  std::vector<DetPoint> points;
  for (double th : Thresholds(trials)) {
    DetPoint p;
    p.threshold = th;
    p.p_miss = FractionBelow(cls.targets, th);
    p.p_fa = 1.0 - FractionBelow(cls.nontargets, th);
    points.push_back(p);
  }
  return points;
}

std::vector<DetPoint> Det(const ScoreTable &scores, const TrialLabels &labels) {
  return Det(CollectTrials(scores, labels));
}

MtwvResult Mtwv(const std::vector<Trial> &trials, const EvalConfig &cfg) {
  cfg.Validate();
  CheckBothClasses(trials);
  const double beta = Beta(cfg, EffectivePrior(trials, cfg));
  MtwvResult best{-std::numeric_limits<double>::infinity(), 0.0};
  for (const auto &p : Det(trials)) {
    double twv = 1.0 - p.p_miss - beta * p.p_fa;
    if (twv > best.mtwv) best = {twv, p.threshold};
  }
  return best;
}

MtwvResult Mtwv(const ScoreTable &scores, const TrialLabels &labels, const EvalConfig &cfg) {
  auto trials = CollectTrials(scores, labels);
  if (cfg.mtwv_mode == MtwvMode::kPooled) return Mtwv(trials, cfg);

  cfg.Validate();
  const double beta = Beta(cfg, EffectivePrior(trials, cfg));
  std::map<std::string, SortedClasses> per_query;
  for (const auto &[key, score] : scores.entries) {
    auto &c = per_query[key.first];
    (labels.entries.at(key) ? c.targets : c.nontargets).push_back(score);
  }
  std::vector<const SortedClasses *> active;
  for (auto &[_, c] : per_query) {
    std::sort(c.targets.begin(), c.targets.end());
    std::sort(c.nontargets.begin(), c.nontargets.end());
    if (!c.targets.empty()) active.push_back(&c);
  }
  MtwvResult best{-std::numeric_limits<double>::infinity(), 0.0};
  for (double th : Thresholds(trials)) {
    double miss = 0.0, fa = 0.0;
    for (const auto *c : active) {
      miss += FractionBelow(c->targets, th);
      if (!c->nontargets.empty()) fa += 1.0 - FractionBelow(c->nontargets, th);
    }
    double twv = 1.0 - miss / active.size() - beta * fa / active.size();
    if (twv > best.mtwv) best = {twv, th};
  }
  return best;
}

std::vector<double> PavPosteriors(const std::vector<Trial> &trials) {
  std::vector<std::size_t> order(trials.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return trials[a].score < trials[b].score;
  });

  struct Block {
    std::size_t begin, end;  // range in order
    std::size_t targets;
  };
  std::vector<Block> blocks;
  for (std::size_t k = 0; k < order.size();) {
    std::size_t e = k, targets = 0;
    while (e < order.size() && trials[order[e]].score == trials[order[k]].score)
      targets += trials[order[e++]].target;
    Block cur{k, e, targets};
    // Merge while the previous rate is not below the current one, so that
    // equal-rate neighbours share one smoothed posterior.
    while (!blocks.empty()) {
      const Block &prev = blocks.back();
      if (prev.targets * (cur.end - cur.begin) < cur.targets * (prev.end - prev.begin)) break;
      cur = {prev.begin, cur.end, prev.targets + cur.targets};
      blocks.pop_back();
    }
    blocks.push_back(cur);
    k = e;
  }

  std::vector<double> post(trials.size());
  for (const auto &b : blocks) {
    double p = (b.targets + 0.5) / (b.end - b.begin + 1.0);
    for (std::size_t k = b.begin; k < b.end; ++k) post[order[k]] = p;
  }
  return post;
}

double Cnxe(const std::vector<Trial> &trials, const std::vector<double> &posteriors,
            double prior) {
  double t_sum = 0.0, n_sum = 0.0;
  std::size_t t_count = 0, n_count = 0;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (trials[i].target) {
      t_sum += -std::log2(posteriors[i]);
      ++t_count;
    } else {
      n_sum += -std::log2(1.0 - posteriors[i]);
      ++n_count;
    }
  }
  if (t_count == 0 || n_count == 0)
    throw DegenerateError("cross entropy needs targets and nontargets");
  double cxe = prior * t_sum / t_count + (1.0 - prior) * n_sum / n_count;
  return cxe / Entropy2(prior);
}

double CnxeMin(const std::vector<Trial> &trials, const EvalConfig &cfg) {
  cfg.Validate();
  CheckBothClasses(trials);
  const double prior = EffectivePrior(trials, cfg);
  if (cfg.calibration == Calibration::kAffine)
    return Cnxe(trials, AffinePosteriors(trials, prior), prior);

  auto post = PavPosteriors(trials);
  if (cfg.target_prior) {
    // PAV posteriors carry the empirical rate; shift their log odds to the
    // configured prior.
    const double empirical = static_cast<double>(CountTargets(trials)) / trials.size();
    const double shift = Logit(prior) - Logit(empirical);
    for (double &p : post) p = Sigmoid(Logit(p) + shift);
  }
  return Cnxe(trials, post, prior);
}

CnxeResult CnxeMin(const ScoreTable &scores, const TrialLabels &labels, const EvalConfig &cfg) {
  CnxeResult r;
  r.cnxe_min = CnxeMin(CollectTrials(scores, labels), cfg);
  std::map<std::string, std::vector<Trial>> per_query;
  for (const auto &[key, score] : scores.entries)
    per_query[key.first].push_back({score, labels.entries.at(key)});
  for (const auto &[query, trials] : per_query) {
    std::size_t targets = CountTargets(trials);
    if (targets == 0 || targets == trials.size()) continue;
    r.per_query[query] = CnxeMin(trials, cfg);
  }
  return r;
}

TTestResult PairedTTestOneTailed(const std::vector<double> &a, const std::vector<double> &b) {
  if (a.size() != b.size())
    throw DataError("t-test: vectors have lengths " + std::to_string(a.size()) + " and " +
                    std::to_string(b.size()));
  const std::size_t n = a.size();
  if (n < 2) throw DataError("t-test: need at least two pairs");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  const double sd = std::sqrt(ss / (n - 1));
  if (!(sd > 0.0)) throw DegenerateError("t-test: differences have zero variance");
  TTestResult r;
  r.df = static_cast<int>(n - 1);
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const double x = r.df / (r.df + r.t * r.t);
  const double tail = 0.5 * boost::math::ibeta(0.5 * r.df, 0.5, x);
  r.p = r.t > 0.0 ? tail : 1.0 - tail;
  return r;
}

MetricReport Evaluate(const ScoreTable &scores, const TrialLabels &labels,
                      const EvalConfig &cfg) {
  cfg.Validate();
  auto trials = CollectTrials(scores, labels);
  MetricReport r;
  r.num_targets = CountTargets(trials);
  r.num_nontargets = trials.size() - r.num_targets;
  r.prior = EffectivePrior(trials, cfg);
  r.prior_configured = cfg.target_prior.has_value();
  r.beta = Beta(cfg, r.prior);
  r.mtwv_mode = cfg.mtwv_mode;
  r.calibration = cfg.calibration;
  r.det_points = Det(trials);
  auto m = Mtwv(scores, labels, cfg);
  r.mtwv = m.mtwv;
  r.mtwv_threshold = m.threshold;
  auto c = CnxeMin(scores, labels, cfg);
  r.cnxe_min = c.cnxe_min;
  r.per_query_cnxe = std::move(c.per_query);
  return r;
}

namespace {

std::string Fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

double ParseDouble(const std::string &s, const std::string &where) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception &) {
    throw DataError(where + ": bad number '" + s + "'");
  }
}

}  // namespace

void WriteReport(const MetricReport &r, const std::string &path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  os << "# calibration=" << (r.calibration == Calibration::kPav ? "pav-smoothed" : "affine")
     << " prior=" << (r.prior_configured ? "configured" : "empirical")
     << " mtwv=" << (r.mtwv_mode == MtwvMode::kPooled ? "pooled" : "per-query-averaged")
     << " pfa=trial-based\n";
  os << "cnxe_min\t" << Fixed(r.cnxe_min, 6) << '\n';
  os << "mtwv\t" << Fixed(r.mtwv, 6) << '\n';
  os << "threshold\t" << Fixed(r.mtwv_threshold, 6) << '\n';
  os << "targets\t" << r.num_targets << '\n';
  os << "nontargets\t" << r.num_nontargets << '\n';
  os << "prior\t" << Fixed(r.prior, 6) << '\n';
  os << "beta\t" << Fixed(r.beta, 6) << '\n';
  for (const auto &[query, v] : r.per_query_cnxe)
    os << "query_cnxe\t" << query << '\t' << Fixed(v, 9) << '\n';
  if (!os) throw DataError("write failed for " + path);
}

MetricReport ReadReport(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  MetricReport r;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string where = path + ":" + std::to_string(lineno);
    if (line.empty()) continue;
    if (line[0] == '#') {
      r.prior_configured = line.find("prior=configured") != std::string::npos;
      if (line.find("calibration=affine") != std::string::npos)
        r.calibration = Calibration::kAffine;
      if (line.find("mtwv=per-query") != std::string::npos)
        r.mtwv_mode = MtwvMode::kPerQueryAveraged;
      continue;
    }
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string tok; std::getline(ls, tok, '\t');) f.push_back(tok);
    if (f.size() == 3 && f[0] == "query_cnxe") {
      r.per_query_cnxe[f[1]] = ParseDouble(f[2], where);
      continue;
    }
    if (f.size() != 2) throw DataError(where + ": malformed report line");
    double v = ParseDouble(f[1], where);
    if (f[0] == "cnxe_min") r.cnxe_min = v;
    else if (f[0] == "mtwv") r.mtwv = v;
    else if (f[0] == "threshold") r.mtwv_threshold = v;
    else if (f[0] == "targets") r.num_targets = static_cast<std::size_t>(v);
    else if (f[0] == "nontargets") r.num_nontargets = static_cast<std::size_t>(v);
    else if (f[0] == "prior") r.prior = v;
    else if (f[0] == "beta") r.beta = v;
    else throw DataError(where + ": unknown field '" + f[0] + "'");
  }
  return r;
}

void WriteDet(const std::vector<DetPoint> &points, const std::string &path) {
  if (points.empty()) throw DataError("det: no points to write");
  auto sorted = points;
  std::stable_sort(sorted.begin(), sorted.end(), [](const DetPoint &a, const DetPoint &b) {
    return a.p_fa != b.p_fa ? a.p_fa < b.p_fa : a.p_miss < b.p_miss;
  });
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  for (const auto &p : sorted) os << Fixed(p.p_fa, 6) << '\t' << Fixed(p.p_miss, 6) << '\n';
  if (!os) throw DataError("write failed for " + path);
}

std::vector<DetPoint> ReadDet(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  std::vector<DetPoint> points;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    const std::string where = path + ":" + std::to_string(lineno);
    if (tab == std::string::npos) throw DataError(where + ": expected p_fa<TAB>p_miss");
    DetPoint p;
    p.threshold = std::numeric_limits<double>::quiet_NaN();
    p.p_fa = ParseDouble(line.substr(0, tab), where);
    p.p_miss = ParseDouble(line.substr(tab + 1), where);
    points.push_back(p);
  }
  return points;
}

CompareResult CompareRuns(const MetricReport &a, const MetricReport &b) {
  if (a.per_query_cnxe.size() != b.per_query_cnxe.size())
    throw DataError("compare: runs cover " + std::to_string(a.per_query_cnxe.size()) + " and " +
                    std::to_string(b.per_query_cnxe.size()) + " queries");
  CompareResult r;
  std::vector<double> va, vb;
  for (const auto &[query, v] : a.per_query_cnxe) {
    auto it = b.per_query_cnxe.find(query);
    if (it == b.per_query_cnxe.end())
      throw DataError("compare: query '" + query + "' missing from the second run");
    va.push_back(v);
    vb.push_back(it->second);
    r.mean_a += v;
    r.mean_b += it->second;
  }
  r.queries = va.size();
  if (r.queries > 0) {
    r.mean_a /= r.queries;
    r.mean_b /= r.queries;
  }
  r.test = PairedTTestOneTailed(va, vb);
  return r;
}

}  // namespace qbe
