// tools/qbe.cc

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

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "qbe/config.h"
#include "qbe/errors.h"
#include "qbe/eval.h"
#include "qbe/frontend.h"
#include "qbe/pipeline.h"
#include "qbe/sad.h"
#include "qbe/search.h"
#include "qbe/synth.h"

namespace fs = std::filesystem;
using namespace qbe;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

Config LoadConfig(const Common &c) {
  Config cfg = c.config_path.empty() ? Config() : Config::Load(c.config_path);
  for (const auto &kv : c.overrides) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.Set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.Set("run.seed", std::to_string(*c.seed));
  if (c.out) cfg.Set("run.out", *c.out);
  if (c.threads) cfg.Set("search.threads", std::to_string(*c.threads));
  return cfg;
}

std::string RequireOut(const Common &c) {
  if (!c.out) throw ConfigError("--out is required");
  return *c.out;
}

void PrintReport(const MetricReport &r) {
  std::printf("cnxe_min %.6f\nmtwv %.6f\nthreshold %.6f\ntargets %zu\nnontargets %zu\n",
              r.cnxe_min, r.mtwv, r.mtwv_threshold, r.num_targets, r.num_nontargets);
}

// "id path" per line.
std::vector<FeatureMatrix> MfccFromList(const std::string &list, const MfccOptions &opts) {
  std::ifstream is(list);
  if (!is) throw DataError("cannot open " + list);
  std::vector<FeatureMatrix> out;
  std::string id, path;
  while (is >> id >> path) {
    if (fs::path(path).is_relative()) path = (fs::path(list).parent_path() / path).string();
    auto wav = ReadWav(path);
    out.push_back(ComputeMfcc(wav.samples, wav.sample_rate, opts, id));
  }
  return out;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Query-by-example spoken term detection"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_path, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--set", common.overrides, "Override a config key (section.key=value)");
  app.add_option("--seed", common.seed, "Random seed");
  app.add_option("--out", common.out, "Output directory or file");
  app.add_option("--threads", common.threads, "Search threads")->check(CLI::PositiveNumber);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress");

  // synth
  auto *synth = app.add_subcommand("synth", "Generate a synthetic corpus");

  // featurize
  auto *featurize = app.add_subcommand("featurize", "Append deltas and normalise features");
  std::string feat_in, feat_wav, cmvn_in, cmvn_out;
  auto *feat_in_opt = featurize->add_option("--in", feat_in, "Static feature archive");
  featurize->add_option("--wav", feat_wav, "List of 'id wav-path' lines")
      ->excludes(feat_in_opt);
  featurize->add_option("--cmvn", cmvn_in, "Apply these CMVN statistics");
  featurize->add_option("--estimate-cmvn", cmvn_out, "Estimate CMVN from the input, write here");

  // train
  auto *train = app.add_subcommand("train", "Train a bottleneck feature extractor");
  std::string corpus;
  train->add_option("--corpus", corpus, "Corpus directory")->required();

  // extract
  auto *extract = app.add_subcommand("extract", "Extract bottleneck features");
  std::string model_path, extract_in;
  bool raw = false;
  extract->add_option("--in", extract_in, "Normalised feature archive")->required();
  auto *model_opt = extract->add_option("--model", model_path, "Model checkpoint");
  extract->add_flag("--raw", raw, "Pass features through unchanged")->excludes(model_opt);

  // sad
  auto *sad = app.add_subcommand("sad", "Remove non-speech frames");
  std::string sad_in, sidecar;
  sad->add_option("--in", sad_in, "Feature archive")->required();
  sad->add_option("--posteriors", sidecar, "Posterior stream sidecar")->required();

  // search
  auto *search = app.add_subcommand("search", "Score every query against every document");
  std::string queries_ark, docs_ark;
  search->add_option("--queries", queries_ark, "Query feature archive")->required();
  search->add_option("--documents", docs_ark, "Document feature archive")->required();

  // znorm
  auto *znorm = app.add_subcommand("znorm", "Per-query score normalisation");
  std::string scores_in;
  znorm->add_option("--in", scores_in, "Raw score file")->required();

  // eval / det
  auto *eval = app.add_subcommand("eval", "Compute cnxe_min, MTWV and DET");
  std::string labels_path, det_out;
  eval->add_option("--scores", scores_in, "Score file")->required();
  eval->add_option("--labels", labels_path, "Trial labels")->required();
  eval->add_option("--det", det_out, "Also write the DET curve here");
  auto *det = app.add_subcommand("det", "Write a DET curve");
  det->add_option("--scores", scores_in, "Score file")->required();
  det->add_option("--labels", labels_path, "Trial labels")->required();

  // compare
  auto *compare = app.add_subcommand("compare", "Paired t-test of per-query cnxe");
  std::string report_a, report_b;
  compare->add_option("report_a", report_a, "First report")->required();
  compare->add_option("report_b", report_b, "Second report")->required();

  // pipeline
  auto *pipeline = app.add_subcommand("pipeline", "Run every stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    const Config cfg = LoadConfig(common);
    const auto exp = ExperimentConfig::FromConfig(cfg);

    if (synth->parsed()) {
      SynthCorpus(exp.synth, RequireOut(common));
    } else if (featurize->parsed()) {
      std::vector<FeatureMatrix> feats;
      if (!feat_wav.empty()) {
        feats = MfccFromList(feat_wav, MfccOptions{});
      } else if (!feat_in.empty()) {
        feats = ReadArchive(feat_in);
      } else {
        throw ConfigError("featurize needs --in or --wav");
      }
      feats = Featurize(feats, exp.delta_window);
      if (!cmvn_out.empty()) {
        auto c = Cmvn::Estimate(feats);
        c.Write(cmvn_out);
        feats = ApplyCmvn(c, feats);
      } else if (!cmvn_in.empty()) {
        feats = ApplyCmvn(Cmvn::Read(cmvn_in), feats);
      }
      WriteArchive(feats, RequireOut(common));
    } else if (train->parsed()) {
      const auto out = RequireOut(common);
      fs::create_directories(out);
      auto manifest = CorpusManifest::Read((fs::path(corpus) / "manifest.txt").string());
      auto languages = SelectLanguages(exp, manifest);
      auto cmvn = EstimateCorpusCmvn(manifest, corpus, languages, exp.delta_window);
      cmvn.Write((fs::path(out) / "cmvn.txt").string());
      auto model = TrainModel(exp, manifest, corpus, languages, cmvn);
      model.Save((fs::path(out) / "model.qbem").string());
      model.WriteManifest((fs::path(out) / "model.txt").string());
    } else if (extract->parsed()) {
      auto feats = ReadArchive(extract_in);
      if (!raw) {
        if (model_path.empty()) throw ConfigError("extract needs --model or --raw");
        feats = ExtractAll(Model::Load(model_path), feats);
      }
      WriteArchive(feats, RequireOut(common));
    } else if (sad->parsed()) {
      std::vector<std::string> dropped;
      auto kept = ApplySad(ReadArchive(sad_in), LoadPosteriorStreams(ReadSadSidecar(sidecar)),
                           exp.sad, &dropped);
      for (const auto &id : dropped) spdlog::warn("dropped '{}'", id);
      WriteArchive(kept, RequireOut(common));
    } else if (search->parsed()) {
      SearchTiming timing;
      auto table = SearchAll(ReadArchive(queries_ark), ReadArchive(docs_ark), exp.search, &timing);
      WriteScores(table, RequireOut(common));
      std::printf("pairs %zu threads %d wall_seconds %.6f\n", timing.pairs, timing.threads,
                  timing.wall_seconds);
    } else if (znorm->parsed()) {
      WriteScores(Znorm(ReadScores(scores_in)), RequireOut(common));
    } else if (eval->parsed()) {
      auto report = Evaluate(ReadScores(scores_in), ReadLabels(labels_path), exp.eval);
      if (common.out) WriteReport(report, *common.out);
      if (!det_out.empty()) WriteDet(report.det_points, det_out);
      PrintReport(report);
    } else if (det->parsed()) {
      WriteDet(Det(ReadScores(scores_in), ReadLabels(labels_path)), RequireOut(common));
    } else if (compare->parsed()) {
      auto r = CompareRuns(ReadReport(report_a), ReadReport(report_b));
      std::printf("queries %zu\nmean_a %.6f\nmean_b %.6f\nt %.6f\np %.6g\n", r.queries, r.mean_a,
                  r.mean_b, r.test.t, r.test.p);
      std::printf("direction %s\n", r.test.t > 0 ? "a has higher cnxe than b"
                                                  : "a has lower cnxe than b");
    } else if (pipeline->parsed()) {
      auto result = RunPipeline(exp, cfg.Hash());
      PrintReport(result.report);
    }
  } catch (const DegenerateError &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const ConfigError &e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError &e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  }
  return 0;
}
