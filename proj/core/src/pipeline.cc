// core/src/pipeline.cc

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

#include "qbe/pipeline.h"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "qbe/errors.h"

namespace qbe {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> &KnownKeys() {
  static const std::set<std::string> keys = {
      "run.out", "run.seed", "corpus.dir",
      "synth.num_languages", "synth.phones_per_language", "synth.shared_phone_fraction",
      "synth.novel_phones", "synth.feature_dim", "synth.train_utterances",
      "synth.dev_utterances", "synth.utterance_phones_min", "synth.utterance_phones_max",
      "synth.query_count", "synth.query_phones_min", "synth.query_phones_max",
      "synth.document_count", "synth.document_phones_min", "synth.document_phones_max",
      "synth.plant_rate", "synth.frames_per_phone_min", "synth.frames_per_phone_max",
      "synth.phone_mean_scale", "synth.articulatory_features", "synth.articulatory_density",
      "synth.phone_residual", "synth.emission_noise", "synth.speaker_scale",
      "synth.silence_rate", "synth.edge_silence_min", "synth.edge_silence_max",
      "synth.sad_streams", "synth.sad_speech_classes", "synth.sad_confidence", "synth.seed",
      "model.features", "model.languages", "model.checkpoint",
      "ffn.hidden_units", "ffn.hidden_layers", "ffn.bottleneck_units", "ffn.dropout",
      "ffn.context_left", "ffn.context_right",
      "resnet.stem_channels", "resnet.stage_channels", "resnet.blocks_per_stage",
      "resnet.bottleneck_units", "resnet.post_bottleneck_units", "resnet.dropout",
      "resnet.context",
      "train.batch_size", "train.epochs", "train.lr_initial", "train.lr_floor",
      "train.max_batches_per_epoch",
      "frontend.delta_window",
      "sad.enabled", "sad.bias", "sad.min_frames",
      "dtw.max_consecutive_nondiagonal",
      "search.threads",
      "eval.cost_false_alarm", "eval.cost_miss", "eval.target_prior", "eval.mtwv_mode",
      "eval.calibration",
  };
  return keys;
}

FeatureKind ParseFeatureKind(const std::string &s) {
  if (s == "raw") return FeatureKind::kRaw;
  if (s == "ffn") return FeatureKind::kFfn;
  if (s == "resnet") return FeatureKind::kResnet;
  throw ConfigError("model.features must be raw, ffn or resnet, got '" + s + "'");
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double Seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Runs one stage, prefixing failures with its name while keeping the error
// category.
template <typename F>
auto Stage(const std::string &name, std::vector<StageTiming> *timings, F &&f) {
  Stopwatch sw;
  auto finish = [&] { timings->push_back({name, sw.Seconds()}); };
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto r = f();
      finish();
      return r;
    }
  } catch (const DegenerateError &e) {
    throw DegenerateError("stage " + name + ": " + e.what());
  } catch (const ConfigError &e) {
    throw ConfigError("stage " + name + ": " + e.what());
  } catch (const DataError &e) {
    throw DataError("stage " + name + ": " + e.what());
  }
}

std::string Path(const std::string &dir, const std::string &file) {
  return (fs::path(dir) / file).string();
}

}  // namespace

const char *FeatureKindName(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kRaw: return "raw";
    case FeatureKind::kFfn: return "ffn";
    case FeatureKind::kResnet: return "resnet";
  }
  return "?";
}

SyntheticCorpusConfig ExperimentConfig::SynthFromConfig(const Config &c, uint64_t seed) {
  SyntheticCorpusConfig s;
  s.num_languages = c.GetInt("synth.num_languages", s.num_languages);
  s.phones_per_language = c.GetInt("synth.phones_per_language", s.phones_per_language);
  s.shared_phone_fraction = c.GetDouble("synth.shared_phone_fraction", s.shared_phone_fraction);
  s.novel_phones = c.GetInt("synth.novel_phones", s.novel_phones);
  s.feature_dim = c.GetInt("synth.feature_dim", s.feature_dim);
  s.train_utterances = c.GetInt("synth.train_utterances", s.train_utterances);
  s.dev_utterances = c.GetInt("synth.dev_utterances", s.dev_utterances);
  s.utterance_phones_min = c.GetInt("synth.utterance_phones_min", s.utterance_phones_min);
  s.utterance_phones_max = c.GetInt("synth.utterance_phones_max", s.utterance_phones_max);
  s.query_count = c.GetInt("synth.query_count", s.query_count);
  s.query_phones_min = c.GetInt("synth.query_phones_min", s.query_phones_min);
  s.query_phones_max = c.GetInt("synth.query_phones_max", s.query_phones_max);
  s.document_count = c.GetInt("synth.document_count", s.document_count);
  s.document_phones_min = c.GetInt("synth.document_phones_min", s.document_phones_min);
  s.document_phones_max = c.GetInt("synth.document_phones_max", s.document_phones_max);
  s.plant_rate = c.GetDouble("synth.plant_rate", s.plant_rate);
  s.frames_per_phone_min = c.GetInt("synth.frames_per_phone_min", s.frames_per_phone_min);
  s.frames_per_phone_max = c.GetInt("synth.frames_per_phone_max", s.frames_per_phone_max);
  s.phone_mean_scale = c.GetDouble("synth.phone_mean_scale", s.phone_mean_scale);
  s.articulatory_features = c.GetInt("synth.articulatory_features", s.articulatory_features);
  s.articulatory_density = c.GetDouble("synth.articulatory_density", s.articulatory_density);
  s.phone_residual = c.GetDouble("synth.phone_residual", s.phone_residual);
  s.emission_noise = c.GetDouble("synth.emission_noise", s.emission_noise);
  s.speaker_scale = c.GetDouble("synth.speaker_scale", s.speaker_scale);
  s.silence_rate = c.GetDouble("synth.silence_rate", s.silence_rate);
  s.edge_silence_min = c.GetInt("synth.edge_silence_min", s.edge_silence_min);
  s.edge_silence_max = c.GetInt("synth.edge_silence_max", s.edge_silence_max);
  s.sad_streams = c.GetInt("synth.sad_streams", s.sad_streams);
  s.sad_speech_classes = c.GetInt("synth.sad_speech_classes", s.sad_speech_classes);
  s.sad_confidence = c.GetDouble("synth.sad_confidence", s.sad_confidence);
  s.seed = c.GetUint64("synth.seed", seed);
  s.Validate();
  return s;
}

ExperimentConfig ExperimentConfig::FromConfig(const Config &c) {
  c.CheckKnown(KnownKeys());
  ExperimentConfig e;
  e.out_dir = c.GetString("run.out", e.out_dir);
  e.seed = c.GetUint64("run.seed", e.seed);
  e.corpus_dir = c.GetString("corpus.dir", e.corpus_dir);
  e.synth = SynthFromConfig(c, e.seed);

  e.features = ParseFeatureKind(c.GetString("model.features", FeatureKindName(e.features)));
  e.languages = c.GetList("model.languages", e.languages);
  e.checkpoint = c.GetString("model.checkpoint", e.checkpoint);

  e.ffn.hidden_units = c.GetInt("ffn.hidden_units", e.ffn.hidden_units);
  e.ffn.hidden_layers = c.GetInt("ffn.hidden_layers", e.ffn.hidden_layers);
  e.ffn.bottleneck_units = c.GetInt("ffn.bottleneck_units", e.ffn.bottleneck_units);
  e.ffn.dropout = static_cast<float>(c.GetDouble("ffn.dropout", e.ffn.dropout));
  e.ffn.context.left = c.GetInt("ffn.context_left", e.ffn.context.left);
  e.ffn.context.right = c.GetInt("ffn.context_right", e.ffn.context.right);

  e.resnet.stem_channels = c.GetInt("resnet.stem_channels", e.resnet.stem_channels);
  e.resnet.stage_channels = c.GetIntList("resnet.stage_channels", e.resnet.stage_channels);
  e.resnet.blocks_per_stage = c.GetInt("resnet.blocks_per_stage", e.resnet.blocks_per_stage);
  e.resnet.bottleneck_units = c.GetInt("resnet.bottleneck_units", e.resnet.bottleneck_units);
  e.resnet.post_bottleneck_units =
      c.GetInt("resnet.post_bottleneck_units", e.resnet.post_bottleneck_units);
  e.resnet.dropout = static_cast<float>(c.GetDouble("resnet.dropout", e.resnet.dropout));
  e.resnet.context = c.GetInt("resnet.context", e.resnet.context);

  e.train.batch_size = c.GetInt("train.batch_size", e.train.batch_size);
  e.train.epochs = c.GetInt("train.epochs", e.train.epochs);
  e.train.lr_initial = c.GetDouble("train.lr_initial", e.train.lr_initial);
  e.train.lr_floor = c.GetDouble("train.lr_floor", e.train.lr_floor);
  e.train.max_batches_per_epoch =
      c.GetInt("train.max_batches_per_epoch", e.train.max_batches_per_epoch);
  if (e.train.batch_size < 1 || e.train.epochs < 1)
    throw ConfigError("train.batch_size and train.epochs must be positive");

  e.delta_window = c.GetInt("frontend.delta_window", e.delta_window);
  if (e.delta_window < 1) throw ConfigError("frontend.delta_window must be >= 1");

  e.sad_enabled = c.GetBool("sad.enabled", e.sad_enabled);
  e.sad.bias = c.GetDouble("sad.bias", e.sad.bias);
  e.sad.min_frames = static_cast<std::size_t>(c.GetInt("sad.min_frames", 10));

  e.search.dtw.max_consecutive_nondiagonal =
      c.GetInt("dtw.max_consecutive_nondiagonal", e.search.dtw.max_consecutive_nondiagonal);
  if (e.search.dtw.max_consecutive_nondiagonal < 1)
    throw ConfigError("dtw.max_consecutive_nondiagonal must be >= 1");
  e.search.threads = c.GetInt("search.threads", e.search.threads);
  if (e.search.threads < 1) throw ConfigError("search.threads must be >= 1");

  e.eval.cost_false_alarm = c.GetDouble("eval.cost_false_alarm", e.eval.cost_false_alarm);
  e.eval.cost_miss = c.GetDouble("eval.cost_miss", e.eval.cost_miss);
  if (!c.GetString("eval.target_prior", "").empty())
    e.eval.target_prior = c.GetDouble("eval.target_prior", 0.0);
  const auto mode = c.GetString("eval.mtwv_mode", "pooled");
  if (mode == "pooled") e.eval.mtwv_mode = MtwvMode::kPooled;
  else if (mode == "per-query") e.eval.mtwv_mode = MtwvMode::kPerQueryAveraged;
  else throw ConfigError("eval.mtwv_mode must be pooled or per-query");
  const auto cal = c.GetString("eval.calibration", "pav");
  if (cal == "pav") e.eval.calibration = Calibration::kPav;
  else if (cal == "affine") e.eval.calibration = Calibration::kAffine;
  else throw ConfigError("eval.calibration must be pav or affine");
  e.eval.Validate();
  return e;
}

std::vector<FeatureMatrix> Featurize(const std::vector<FeatureMatrix> &statics, int window) {
  std::vector<FeatureMatrix> out;
  out.reserve(statics.size());
  for (const auto &f : statics) out.push_back(AddDeltas(f, window));
  return out;
}

std::vector<FeatureMatrix> ApplyCmvn(const Cmvn &cmvn, const std::vector<FeatureMatrix> &feats) {
  std::vector<FeatureMatrix> out;
  out.reserve(feats.size());
  for (const auto &f : feats) out.push_back(cmvn.Apply(f));
  return out;
}

LanguageData LoadLanguageSplit(const CorpusManifest &manifest, const std::string &corpus_dir,
                               const std::string &split, int delta_window, const Cmvn &cmvn) {
  const auto &s = manifest.Split(split);
  if (s.alignment.empty()) throw DataError("split '" + split + "' has no frame labels");
  LanguageData data;
  data.language_id = s.language;
  data.utterances = ApplyCmvn(cmvn, Featurize(ReadArchive(Path(corpus_dir, s.archive)), delta_window));
  const auto ali = ReadAlignments(Path(corpus_dir, s.alignment));
  for (const auto &u : data.utterances) {
    auto it = ali.find(u.id());
    if (it == ali.end()) throw DataError("utterance '" + u.id() + "' has no labels");
    if (it->second.size() != u.frames())
      throw DataError("utterance '" + u.id() + "': " + std::to_string(it->second.size()) +
                      " labels for " + std::to_string(u.frames()) + " frames");
    data.labels.push_back(it->second);
  }
  return data;
}

std::vector<FeatureMatrix> ExtractAll(const Model &model, const std::vector<FeatureMatrix> &feats) {
  std::vector<FeatureMatrix> out;
  out.reserve(feats.size());
  for (const auto &f : feats) out.push_back(model.ExtractBottleneck(f));
  return out;
}

std::vector<FeatureMatrix> ApplySad(const std::vector<FeatureMatrix> &feats,
                                    const std::map<std::string, std::vector<PosteriorStream>> &streams,
                                    const SadOptions &opts, std::vector<std::string> *dropped) {
  std::vector<FeatureMatrix> out;
  for (const auto &f : feats) {
    auto it = streams.find(f.id());
    if (it == streams.end()) throw DataError("no SAD posteriors for utterance '" + f.id() + "'");
    auto kept = FilterFrames(f, it->second, opts);
    if (Admit(kept, opts)) {
      out.push_back(std::move(kept));
    } else if (dropped) {
      dropped->push_back(f.id());
    }
  }
  return out;
}

std::vector<std::string> SelectLanguages(const ExperimentConfig &cfg,
                                         const CorpusManifest &manifest) {
  auto languages = cfg.languages.empty() ? manifest.languages : cfg.languages;
  for (const auto &l : languages)
    if (!manifest.num_classes.count(l))
      throw ConfigError("language '" + l + "' is not in the corpus");
  return languages;
}

Cmvn EstimateCorpusCmvn(const CorpusManifest &manifest, const std::string &corpus_dir,
                        const std::vector<std::string> &languages, int delta_window) {
  std::vector<FeatureMatrix> train_feats;
  for (const auto &l : languages) {
    auto f = Featurize(ReadArchive(Path(corpus_dir, manifest.Split("train-" + l).archive)),
                       delta_window);
    for (auto &m : f) train_feats.push_back(std::move(m));
  }
  return Cmvn::Estimate(train_feats);
}

Model TrainModel(const ExperimentConfig &cfg, const CorpusManifest &manifest,
                 const std::string &corpus_dir, const std::vector<std::string> &languages,
                 const Cmvn &cmvn, std::vector<EpochStats> *epochs) {
  if (cfg.features == FeatureKind::kRaw) throw ConfigError("raw features need no model");
  std::vector<LanguageSpec> specs;
  std::vector<LanguageData> train, dev;
  for (const auto &l : languages) {
    specs.push_back({l, manifest.num_classes.at(l)});
    train.push_back(LoadLanguageSplit(manifest, corpus_dir, "train-" + l, cfg.delta_window, cmvn));
    dev.push_back(LoadLanguageSplit(manifest, corpus_dir, "dev-" + l, cfg.delta_window, cmvn));
  }
  const int base_dims = static_cast<int>(cmvn.dims());
  Model m;
  if (cfg.features == FeatureKind::kFfn) {
    FfnConfig fc = cfg.ffn;
    fc.context.base_dims = base_dims;
    m = BuildFfn(specs, fc, cfg.seed);
  } else {
    ResnetConfig rc = cfg.resnet;
    rc.base_dims = base_dims;
    m = BuildResnet(specs, rc, cfg.seed);
  }
  TrainOptions topt = cfg.train;
  topt.seed = cfg.seed + 1;
  auto r = Train(&m, train, dev, topt, [](const EpochStats &s) {
    spdlog::info("epoch {} train {:.4f} dev {:.4f} acc {:.3f} lr {:g}", s.epoch, s.train_loss,
                 s.dev_loss, s.dev_accuracy, s.lr);
  });
  if (epochs) *epochs = r.epochs;
  return m;
}

PipelineResult RunPipeline(const ExperimentConfig &cfg, const std::string &config_hash) {
  PipelineResult result;
  result.config_hash = config_hash;
  auto &timings = result.timings;
  fs::create_directories(cfg.out_dir);
  const std::string out = cfg.out_dir;
  const std::string corpus_dir =
      cfg.corpus_dir.empty() ? Path(out, "corpus") : cfg.corpus_dir;
  const std::string manifest_path = Path(corpus_dir, "manifest.txt");

  auto manifest = Stage("corpus", &timings, [&] {
    if (!fs::exists(manifest_path)) {
      spdlog::info("generating synthetic corpus in {}", corpus_dir);
      return SynthCorpus(cfg.synth, corpus_dir);
    }
    return CorpusManifest::Read(manifest_path);
  });

  const auto languages = SelectLanguages(cfg, manifest);

  // Normalisation statistics come from the training splits of the selected
  // languages.
  Cmvn cmvn;
  std::vector<FeatureMatrix> queries, documents;
  Stage("featurize", &timings, [&] {
    cmvn = EstimateCorpusCmvn(manifest, corpus_dir, languages, cfg.delta_window);
    cmvn.Write(Path(out, "cmvn.txt"));
    queries = ApplyCmvn(cmvn, Featurize(ReadArchive(Path(corpus_dir, manifest.Split("queries").archive)),
                                        cfg.delta_window));
    documents = ApplyCmvn(cmvn, Featurize(ReadArchive(Path(corpus_dir, manifest.Split("documents").archive)),
                                          cfg.delta_window));
    WriteArchive(queries, Path(out, "queries.feats.ark"));
    WriteArchive(documents, Path(out, "documents.feats.ark"));
  });

  std::optional<Model> model;
  if (cfg.features != FeatureKind::kRaw) {
    model = Stage("train", &timings, [&]() -> Model {
      if (!cfg.checkpoint.empty() && fs::exists(cfg.checkpoint)) {
        spdlog::info("loading checkpoint {}", cfg.checkpoint);
        return Model::Load(cfg.checkpoint);
      }
      Model m = TrainModel(cfg, manifest, corpus_dir, languages, cmvn, &result.epochs);
      m.Save(Path(out, "model.qbem"));
      m.WriteManifest(Path(out, "model.txt"));
      return m;
    });
    Stage("extract", &timings, [&] {
      queries = ExtractAll(*model, queries);
      documents = ExtractAll(*model, documents);
      WriteArchive(queries, Path(out, "queries.bnf.ark"));
      WriteArchive(documents, Path(out, "documents.bnf.ark"));
    });
  }

  if (cfg.sad_enabled) {
    Stage("sad", &timings, [&] {
      std::vector<std::string> dropped;
      auto qs = LoadPosteriorStreams(ReadSadSidecar(Path(corpus_dir, manifest.query_sad)));
      auto ds = LoadPosteriorStreams(ReadSadSidecar(Path(corpus_dir, manifest.document_sad)));
      queries = ApplySad(queries, qs, cfg.sad, &dropped);
      documents = ApplySad(documents, ds, cfg.sad, &dropped);
      for (const auto &id : dropped)
        spdlog::warn("sad: utterance '{}' dropped (< {} speech frames)", id, cfg.sad.min_frames);
      WriteArchive(queries, Path(out, "queries.sad.ark"));
      WriteArchive(documents, Path(out, "documents.sad.ark"));
    });
  }

  ScoreTable raw = Stage("search", &timings, [&] {
    auto t = SearchAll(queries, documents, cfg.search, &result.search);
    WriteScores(t, Path(out, "scores.raw.tsv"));
    return t;
  });
  ScoreTable norm = Stage("znorm", &timings, [&] {
    auto t = Znorm(raw);
    WriteScores(t, Path(out, "scores.znorm.tsv"));
    return t;
  });
  result.report = Stage("evaluate", &timings, [&] {
    auto labels = ReadLabels(Path(corpus_dir, manifest.trials));
    auto r = Evaluate(norm, labels, cfg.eval);
    WriteReport(r, Path(out, "report.txt"));
    WriteDet(r.det_points, Path(out, "det.tsv"));
    return r;
  });

  std::ofstream log(Path(out, "run.log"), std::ios::trunc);
  log << "config_hash " << (config_hash.empty() ? "-" : config_hash) << '\n';
  log << "seed " << cfg.seed << '\n';
  log << "features " << FeatureKindName(cfg.features) << '\n';
  for (const auto &e : result.epochs)
    log << "epoch " << e.epoch << " train_loss " << e.train_loss << " dev_loss " << e.dev_loss
        << " dev_accuracy " << e.dev_accuracy << " lr " << e.lr << '\n';
  for (const auto &t : timings) log << "stage " << t.stage << ' ' << t.seconds << '\n';
  log << "search pairs " << result.search.pairs << " threads " << result.search.threads
      << " wall_seconds " << result.search.wall_seconds << '\n';
  log << "cnxe_min " << result.report.cnxe_min << " mtwv " << result.report.mtwv << '\n';
  return result;
}

}  // namespace qbe
