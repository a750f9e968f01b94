// core/src/synth.cc

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

#include "qbe/synth.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qbe/errors.h"
#include "qbe/eval.h"
#include "qbe/sad.h"

namespace qbe {

namespace fs = std::filesystem;

void SyntheticCorpusConfig::Validate() const {
  auto need = [](bool ok, const std::string &msg) {
    if (!ok) throw ConfigError("synth: " + msg);
  };
  need(num_languages >= 1, "num_languages must be >= 1");
  need(phones_per_language >= 3, "phones_per_language must be >= 3");
  need(shared_phone_fraction >= 0.0 && shared_phone_fraction <= 1.0,
       "shared_phone_fraction must lie in [0, 1]");
  need(novel_phones >= 0, "novel_phones must be >= 0");
  need(feature_dim >= 3 && feature_dim % 3 == 0, "feature_dim must be a positive multiple of 3");
  need(train_utterances >= 1 && dev_utterances >= 1, "each training split needs utterances");
  need(utterance_phones_min >= 1 && utterance_phones_min <= utterance_phones_max,
       "bad utterance phone range");
  need(query_count >= 1 && document_count >= 1, "need at least one query and one document");
  need(query_phones_min >= 1 && query_phones_min <= query_phones_max, "bad query phone range");
  need(document_phones_min >= 1 && document_phones_min <= document_phones_max,
       "bad document phone range");
  need(query_phones_max <= document_phones_min,
       "query_phones_max exceeds document_phones_min; a query cannot fit a document");
  need(plant_rate >= 0.0 && plant_rate < 1.0, "plant_rate must lie in [0, 1)");
  need(frames_per_phone_min >= 1 && frames_per_phone_min <= frames_per_phone_max,
       "bad frames-per-phone range");
  need(edge_silence_min >= 0 && edge_silence_min <= edge_silence_max, "bad edge silence range");
  need(silence_rate >= 0.0 && silence_rate <= 1.0, "silence_rate must lie in [0, 1]");
  need(articulatory_features >= 0, "articulatory_features must be >= 0");
  need(articulatory_density > 0.0 && articulatory_density <= 1.0,
       "articulatory_density must lie in (0, 1]");
  need(phone_residual >= 0.0, "phone_residual must be >= 0");
  need(phone_mean_scale > 0.0 && emission_noise >= 0.0 && speaker_scale >= 0.0,
       "scales must be non-negative");
  need(sad_streams >= 1 && sad_speech_classes >= 1, "SAD needs streams and speech classes");
}

const CorpusSplit &CorpusManifest::Split(const std::string &name) const {
  for (const auto &s : splits)
    if (s.name == name) return s;
  throw DataError("manifest has no split '" + name + "'");
}

void CorpusManifest::Write(const std::string &path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  os << "seed " << seed << '\n';
  for (const auto &l : languages) os << "language " << l << ' ' << num_classes.at(l) << '\n';
  for (const auto &s : splits) {
    os << "split " << s.name << ' ' << (s.language.empty() ? "-" : s.language) << ' '
       << s.archive << ' ' << (s.alignment.empty() ? "-" : s.alignment) << '\n';
    os << "utterances " << s.name;
    for (const auto &u : s.utterances) os << ' ' << u;
    os << '\n';
  }
  os << "query_sad " << query_sad << '\n';
  os << "document_sad " << document_sad << '\n';
  os << "trials " << trials << '\n';
  os << "phone_means " << phone_means << '\n';
  if (!os) throw DataError("write failed for " + path);
}

CorpusManifest CorpusManifest::Read(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  CorpusManifest m;
  std::string line;
  std::size_t lineno = 0;
  auto bad = [&](const std::string &why) {
    return DataError(path + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "seed") {
      ls >> m.seed;
    } else if (key == "language") {
      std::string id;
      int classes = 0;
      if (!(ls >> id >> classes)) throw bad("expected 'language <id> <classes>'");
      m.languages.push_back(id);
      m.num_classes[id] = classes;
    } else if (key == "split") {
      CorpusSplit s;
      if (!(ls >> s.name >> s.language >> s.archive >> s.alignment))
        throw bad("expected 'split <name> <language> <archive> <alignment>'");
      if (s.language == "-") s.language.clear();
      if (s.alignment == "-") s.alignment.clear();
      m.splits.push_back(s);
    } else if (key == "utterances") {
      std::string name;
      ls >> name;
      auto it = std::find_if(m.splits.begin(), m.splits.end(),
                             [&](const CorpusSplit &s) { return s.name == name; });
      if (it == m.splits.end()) throw bad("utterances for unknown split '" + name + "'");
      for (std::string u; ls >> u;) it->utterances.push_back(u);
    } else if (key == "query_sad") {
      ls >> m.query_sad;
    } else if (key == "document_sad") {
      ls >> m.document_sad;
    } else if (key == "trials") {
      ls >> m.trials;
    } else if (key == "phone_means") {
      ls >> m.phone_means;
    } else {
      throw bad("unknown key '" + key + "'");
    }
    if (ls.fail() && !ls.eof()) throw bad("malformed line");
  }
  return m;
}

void WriteAlignments(const std::map<std::string, std::vector<int>> &ali,
                     const std::string &path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  for (const auto &[id, labels] : ali) {
    os << id;
    for (int l : labels) os << ' ' << l;
    os << '\n';
  }
  if (!os) throw DataError("write failed for " + path);
}

std::map<std::string, std::vector<int>> ReadAlignments(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  std::map<std::string, std::vector<int>> ali;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id;
    ls >> id;
    std::vector<int> labels;
    for (int l; ls >> l;) labels.push_back(l);
    if (!ls.eof()) throw DataError(path + ": bad label in utterance '" + id + "'");
    if (!ali.emplace(id, std::move(labels)).second)
      throw DataError(path + ": duplicate utterance '" + id + "'");
  }
  return ali;
}

namespace {

constexpr int kSilence = 0;

struct PhoneSet {
  int total = 0;                                 // including silence
  std::vector<std::vector<int>> language;        // global ids, no silence
  std::vector<int> search;                       // global ids, no silence
};

PhoneSet BuildPhoneSet(const SyntheticCorpusConfig &cfg) {
  PhoneSet ps;
  const int k = cfg.phones_per_language;
  const int shared = static_cast<int>(std::lround(cfg.shared_phone_fraction * k));
  int next = 1;
  std::vector<int> common;
  for (int i = 0; i < shared; ++i) common.push_back(next++);
  for (int l = 0; l < cfg.num_languages; ++l) {
    auto inv = common;
    for (int i = shared; i < k; ++i) inv.push_back(next++);
    ps.language.push_back(inv);
  }
  for (int g = 1; g < next; ++g) ps.search.push_back(g);
  for (int i = 0; i < cfg.novel_phones; ++i) ps.search.push_back(next++);
  ps.total = next;
  return ps;
}

struct Generated {
  FeatureMatrix feats;
  std::vector<int> phones;  // global phone id per frame
};

class Generator {
 public:
  Generator(const SyntheticCorpusConfig &cfg, int total_phones, Rng *rng)
      : cfg_(cfg), rng_(*rng), dims_(cfg.static_dims()), means_(total_phones * dims_) {
    const int f = cfg_.articulatory_features;
    if (f == 0) {
      for (auto &v : means_) v = rng_.Normal(0.0, cfg_.phone_mean_scale);
      return;
    }
    const double unit = cfg_.phone_mean_scale / std::sqrt(f * cfg_.articulatory_density);
    std::vector<double> basis(static_cast<std::size_t>(f) * dims_);
    for (auto &v : basis) v = rng_.Normal(0.0, unit);
    for (int g = 0; g < total_phones; ++g) {
      double *mu = &means_[static_cast<std::size_t>(g) * dims_];
      for (int d = 0; d < dims_; ++d) mu[d] = rng_.Normal(0.0, cfg_.phone_residual);
      for (int k = 0; k < f; ++k) {
        if (!rng_.Bernoulli(cfg_.articulatory_density)) continue;
        for (int d = 0; d < dims_; ++d) mu[d] += basis[static_cast<std::size_t>(k) * dims_ + d];
      }
    }
  }

  const std::vector<double> &means() const { return means_; }

  int Duration() { return rng_.Int(cfg_.frames_per_phone_min, cfg_.frames_per_phone_max); }

  std::vector<int> RandomPhones(const std::vector<int> &inventory, int lo, int hi) {
    std::vector<int> seq(rng_.Int(lo, hi));
    for (auto &p : seq) p = inventory[rng_.Int(0, static_cast<int>(inventory.size()) - 1)];
    return seq;
  }

  // Expands phones to frames with pauses and edge silence, under a fresh
  // speaker.
  Generated Render(const std::string &id, const std::vector<int> &phones, bool pauses) {
    std::vector<int> frames;
    auto add = [&](int phone, int n) { frames.insert(frames.end(), n, phone); };
    add(kSilence, rng_.Int(cfg_.edge_silence_min, cfg_.edge_silence_max));
    for (std::size_t i = 0; i < phones.size(); ++i) {
      add(phones[i], Duration());
      if (pauses && i + 1 < phones.size() && rng_.Bernoulli(cfg_.silence_rate))
        add(kSilence, Duration());
    }
    add(kSilence, rng_.Int(cfg_.edge_silence_min, cfg_.edge_silence_max));

    std::vector<double> speaker(dims_);
    for (auto &v : speaker) v = rng_.Normal(0.0, cfg_.speaker_scale);
    FeatureMatrix feats(id, frames.size(), dims_);
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const double *mu = &means_[static_cast<std::size_t>(frames[t]) * dims_];
      for (int d = 0; d < dims_; ++d)
        feats(t, d) = static_cast<float>(mu[d] + speaker[d] + rng_.Normal(0.0, cfg_.emission_noise));
    }
    return {std::move(feats), std::move(frames)};
  }

  // Posteriors of one recogniser: classes 0 and 1 are non-speech.
  FeatureMatrix Posteriors(const std::string &id, const std::vector<int> &phones) {
    const int classes = 2 + cfg_.sad_speech_classes;
    FeatureMatrix post(id, phones.size(), classes);
    std::vector<double> logits(classes);
    for (std::size_t t = 0; t < phones.size(); ++t) {
      for (auto &v : logits) v = rng_.Normal();
      int hot = phones[t] == kSilence ? rng_.Int(0, 1)
                                      : 2 + (phones[t] - 1) % cfg_.sad_speech_classes;
      logits[hot] += cfg_.sad_confidence;
      double mx = *std::max_element(logits.begin(), logits.end()), z = 0.0;
      for (auto &v : logits) z += (v = std::exp(v - mx));
      for (int c = 0; c < classes; ++c) post(t, c) = static_cast<float>(logits[c] / z);
    }
    return post;
  }

  Rng &rng() { return rng_; }

 private:
  const SyntheticCorpusConfig &cfg_;
  Rng &rng_;
  int dims_;
  std::vector<double> means_;
};

std::string Id(const std::string &prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", i);
  return prefix + buf;
}

}  // namespace

CorpusManifest SynthCorpus(const SyntheticCorpusConfig &cfg, const std::string &dir) {
  cfg.Validate();
  fs::create_directories(dir);
  const auto phones = BuildPhoneSet(cfg);
  Rng rng(cfg.seed);
  Generator gen(cfg, phones.total, &rng);

  CorpusManifest m;
  m.seed = cfg.seed;
  {
    FeatureMatrix means("means", phones.total, cfg.static_dims());
    for (int g = 0; g < phones.total; ++g)
      for (int d = 0; d < cfg.static_dims(); ++d)
        means(g, d) = static_cast<float>(gen.means()[g * cfg.static_dims() + d]);
    m.phone_means = "phone-means.ark";
    WriteArchive({means}, (fs::path(dir) / m.phone_means).string());
  }

  for (int l = 0; l < cfg.num_languages; ++l) {
    const std::string lang = "L" + std::to_string(l + 1);
    const auto &inv = phones.language[l];
    std::map<int, int> local;
    for (std::size_t i = 0; i < inv.size(); ++i) local[inv[i]] = static_cast<int>(i) + 1;
    m.languages.push_back(lang);
    m.num_classes[lang] = static_cast<int>(inv.size()) + 1;
    for (const char *split : {"train", "dev"}) {
      const int count = std::string(split) == "train" ? cfg.train_utterances : cfg.dev_utterances;
      CorpusSplit s{std::string(split) + "-" + lang, lang, "", "", {}};
      s.archive = s.name + ".ark";
      s.alignment = s.name + ".ali";
      std::vector<FeatureMatrix> feats;
      std::map<std::string, std::vector<int>> ali;
      for (int u = 0; u < count; ++u) {
        auto seq = gen.RandomPhones(inv, cfg.utterance_phones_min, cfg.utterance_phones_max);
        auto g = gen.Render(Id(s.name + "-", u), seq, true);
        std::vector<int> labels(g.phones.size());
        for (std::size_t t = 0; t < labels.size(); ++t)
          labels[t] = g.phones[t] == kSilence ? 0 : local.at(g.phones[t]);
        ali[g.feats.id()] = std::move(labels);
        s.utterances.push_back(g.feats.id());
        feats.push_back(std::move(g.feats));
      }
      WriteArchive(feats, (fs::path(dir) / s.archive).string());
      WriteAlignments(ali, (fs::path(dir) / s.alignment).string());
      m.splits.push_back(std::move(s));
    }
  }

  // Queries, then documents with planted query occurrences.
  std::vector<std::vector<int>> query_phones(cfg.query_count);
  for (auto &q : query_phones)
    q = gen.RandomPhones(phones.search, cfg.query_phones_min, cfg.query_phones_max);

  const int plants =
      cfg.plant_rate == 0.0
          ? 0
          : std::max(1, static_cast<int>(std::lround(cfg.plant_rate * cfg.document_count)));
  std::vector<std::vector<int>> planted_in(cfg.document_count);
  for (int q = 0; q < cfg.query_count; ++q) {
    std::vector<int> docs(cfg.document_count);
    for (int d = 0; d < cfg.document_count; ++d) docs[d] = d;
    rng.Shuffle(&docs);
    for (int k = 0; k < plants; ++k) planted_in[docs[k]].push_back(q);
  }

  auto emit = [&](const std::string &name, const std::vector<std::vector<int>> &seqs,
                  const std::string &prefix, bool pauses) {
    CorpusSplit s{name, "", name + ".ark", name + ".ali", {}};
    std::vector<FeatureMatrix> feats;
    std::map<std::string, std::vector<int>> ali;
    std::vector<std::vector<FeatureMatrix>> streams(cfg.sad_streams);
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      auto g = gen.Render(Id(prefix, static_cast<int>(i)), seqs[i], pauses);
      for (int k = 0; k < cfg.sad_streams; ++k)
        streams[k].push_back(gen.Posteriors(g.feats.id(), g.phones));
      ali[g.feats.id()] = std::move(g.phones);
      s.utterances.push_back(g.feats.id());
      feats.push_back(std::move(g.feats));
    }
    WriteArchive(feats, (fs::path(dir) / s.archive).string());
    WriteAlignments(ali, (fs::path(dir) / s.alignment).string());
    SadSidecar sidecar;
    for (int k = 0; k < cfg.sad_streams; ++k) {
      std::string ark = name + "-post" + std::to_string(k + 1) + ".ark";
      WriteArchive(streams[k], (fs::path(dir) / ark).string());
      sidecar.archives.push_back(ark);
      sidecar.nonspeech.push_back({0, 1});
    }
    WriteSadSidecar(sidecar, (fs::path(dir) / (name + ".sad")).string());
    m.splits.push_back(std::move(s));
  };

  emit("queries", query_phones, "q", false);
  std::vector<std::vector<int>> doc_phones(cfg.document_count);
  for (int d = 0; d < cfg.document_count; ++d) {
    auto seq = gen.RandomPhones(phones.search, cfg.document_phones_min, cfg.document_phones_max);
    for (int q : planted_in[d]) {
      auto pos = seq.begin() + rng.Int(0, static_cast<int>(seq.size()));
      seq.insert(pos, query_phones[q].begin(), query_phones[q].end());
    }
    doc_phones[d] = std::move(seq);
  }
  emit("documents", doc_phones, "d", true);
  m.query_sad = "queries.sad";
  m.document_sad = "documents.sad";

  TrialLabels labels;
  for (int q = 0; q < cfg.query_count; ++q)
    for (int d = 0; d < cfg.document_count; ++d) {
      const auto &p = planted_in[d];
      labels.Add(Id("q", q), Id("d", d), std::find(p.begin(), p.end(), q) != p.end());
    }
  m.trials = "trials.tsv";
  WriteLabels(labels, (fs::path(dir) / m.trials).string());
  m.Write((fs::path(dir) / "manifest.txt").string());
  return m;
}

}  // namespace qbe
