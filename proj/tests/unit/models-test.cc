// tests/unit/models-test.cc

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
#include <iterator>

#include "qbe/errors.h"
#include "qbe/model.h"
#include "qbe/nn-train.h"
#include "qbe/trainer.h"
#include "test-util.h"

namespace qbe {
namespace {

std::size_t DenseCount(std::size_t in, std::size_t out) { return in * out + out; }
std::size_t NormCount(std::size_t dim) { return 2 * dim; }

// Trainable scalars of the FFN described by its layer recipe: per hidden
// layer LN + dense, then LN + bottleneck, LN + dense back to hidden, LN,
// and one dense head per language.
std::size_t FfnOracle(std::size_t input, std::size_t hidden, int hidden_layers,
                      std::size_t bottleneck, const std::vector<std::size_t> &classes) {
  std::size_t total = 0, in = input;
  for (int i = 0; i < hidden_layers; ++i) {
    total += NormCount(in) + DenseCount(in, hidden);
    in = hidden;
  }
  total += NormCount(hidden) + DenseCount(hidden, bottleneck);
  total += NormCount(bottleneck) + DenseCount(bottleneck, hidden);
  total += NormCount(hidden);
  for (std::size_t c : classes) total += DenseCount(hidden, c);
  return total;
}

std::size_t ResidualOracle(std::size_t in, std::size_t out, int stride) {
  std::size_t n = 9 * in * out + NormCount(out) + 9 * out * out + NormCount(out);
  if (in != out || stride != 1) n += in * out + NormCount(out);
  return n;
}

TEST(Ffn, SpanishHeadHas130Classes) {
  auto m = BuildFfn(GlobalPhoneLanguages({"ES"}));
  ASSERT_EQ(m.heads().size(), 1u);
  EXPECT_EQ(m.heads()[0].num_classes, 130);
  EXPECT_EQ(m.heads()[0].dense->spec().out, 130);
  EXPECT_EQ(m.input_spec().FlatSize(), 507);
}

int CountKind(const Model &m, LayerKind kind, int upto) {
  int n = 0;
  for (int i = 0; i < upto; ++i) n += m.trunk()[i]->spec().kind == kind;
  return n;
}

TEST(Ffn, DepthFollowsLanguageCount) {
  auto mono = BuildFfn(GlobalPhoneLanguages({"ES"}));
  auto three = BuildFfn(GlobalPhoneLanguages({"PT", "ES", "RU"}));
  auto five = BuildFfn(GlobalPhoneLanguages({"FR", "GE", "PT", "ES", "RU"}));
  EXPECT_EQ(CountKind(mono, LayerKind::kDense, mono.bottleneck_index()), 3);
  EXPECT_EQ(CountKind(three, LayerKind::kDense, three.bottleneck_index()), 4);
  EXPECT_EQ(CountKind(five, LayerKind::kDense, five.bottleneck_index()), 5);
  EXPECT_EQ(three.heads().size(), 3u);
  EXPECT_EQ(five.heads().size(), 5u);
  for (const Model *m : {&mono, &three, &five}) {
    EXPECT_EQ(m->bottleneck_dims(), 32);
    // Linear bottleneck: the next layer is a norm, never a ReLU.
    EXPECT_NE(m->trunk()[m->bottleneck_index() + 1]->spec().kind, LayerKind::kRelu);
    for (int i = 0; i < m->bottleneck_index(); ++i)
      if (m->trunk()[i]->spec().kind == LayerKind::kDense) {
        EXPECT_EQ(m->trunk()[i]->spec().out, 1024);
        EXPECT_EQ(m->trunk()[i - 1]->spec().kind, LayerKind::kLayerNorm);
        EXPECT_EQ(m->trunk()[i + 1]->spec().kind, LayerKind::kRelu);
      }
  }
}

TEST(Ffn, RejectsBadLanguageLists) {
  EXPECT_THROW(BuildFfn({}), ConfigError);
  EXPECT_THROW(BuildFfn(GlobalPhoneLanguages({"FR", "GE", "PT", "ES", "RU", "FR"})), ConfigError);
  EXPECT_THROW(GlobalPhoneLanguages({"XX"}), ConfigError);
}

TEST(ParamCount, SpanishMonolingualMatchesLayerSum) {
  auto m = BuildFfn(GlobalPhoneLanguages({"ES"}));
  auto pc = m.CountParams();
  const std::size_t oracle = FfnOracle(507, 1024, 3, 32, {130});
  EXPECT_EQ(oracle, 2828504u);
  EXPECT_EQ(pc.total, oracle);
  std::size_t sum = 0;
  for (const auto &it : pc.items) sum += it.count;
  EXPECT_EQ(sum, pc.total);
}

TEST(ParamCount, MultilingualOrdering) {
  auto mono = BuildFfn(GlobalPhoneLanguages({"ES"})).CountParams().total;
  auto three = BuildFfn(GlobalPhoneLanguages({"PT", "ES", "RU"})).CountParams().total;
  auto five = BuildFfn(GlobalPhoneLanguages({"FR", "GE", "PT", "ES", "RU"})).CountParams().total;
  EXPECT_EQ(three, FfnOracle(507, 1024, 4, 32, {145, 130, 151}));
  EXPECT_EQ(five, FfnOracle(507, 1024, 5, 32, {124, 133, 145, 130, 151}));
  EXPECT_GT(five, three);
  EXPECT_GT(three, mono);
}

TEST(ParamCount, DefaultResnetMatchesLayerSum) {
  auto m = BuildResnet(GlobalPhoneLanguages({"ES"}));
  std::size_t oracle = 9 * 16 + NormCount(16);
  std::size_t ch = 16;
  const std::size_t stages[] = {16, 32, 64, 128, 256};
  for (int s = 0; s < 5; ++s) {
    oracle += ResidualOracle(ch, stages[s], s > 0 ? 2 : 1);
    ch = stages[s];
  }
  oracle += DenseCount(256, 32) + DenseCount(32, 256) + DenseCount(256, 130);
  EXPECT_EQ(m.CountParams().total, oracle);
  EXPECT_EQ(oracle, 1276370u);
}

TEST(Resnet, PooledVectorHas256Entries) {
  ResnetConfig small;
  small.stage_channels = {8, 256};
  for (const ResnetConfig &cfg : {ResnetConfig{}, small}) {
    auto m = BuildResnet(GlobalPhoneLanguages({"PT", "RU"}), cfg);
    Rng rng(1);
    auto feats = testing::RandomMatrix("u", 3, 39, rng);
    Tensor<float> z = m.BuildInput(feats, 0, 3);
    EXPECT_EQ(z.shape(), (std::vector<int>{3, 1, 39, 25}));
    for (int i = 0; i < m.bottleneck_index(); ++i) z = m.trunk()[i]->Infer(z);
    EXPECT_EQ(z.shape(), (std::vector<int>{3, 256}));
    EXPECT_EQ(m.bottleneck_dims(), 32);
  }
}

TEST(Resnet, StrideTwoBlockShape) {
  auto block = MakeLayer<float>(LayerSpec::Residual(16, 32, 2));
  Rng rng(2);
  block->Initialize(rng);
  auto y = block->Infer(Tensor<float>({2, 16, 39, 25}, 0.5f));
  EXPECT_EQ(y.shape(), (std::vector<int>{2, 32, 20, 13}));
}

TEST(Resnet, ZeroResidualBranchGivesRelu) {
  auto block = MakeLayer<double>(LayerSpec::Residual(3, 3, 1));
  Rng rng(3);
  block->Initialize(rng);
  Tensor<double> x({2, 3, 4, 5});
  for (auto &v : x.vec()) v = rng.Normal();
  auto y = block->Infer(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y[i], std::max(0.0, x[i]));
}

TEST(Resnet, RejectsBadStages) {
  ResnetConfig cfg;
  cfg.stage_channels = {16, 128};
  EXPECT_THROW(BuildResnet(GlobalPhoneLanguages({"ES"}), cfg), ConfigError);
}

// Small stacked-input FFN for training tests.
FfnConfig TinyFfn(int base_dims, int hidden = 32, float dropout = 0.0f, int context = 0) {
  FfnConfig cfg;
  cfg.hidden_units = hidden;
  cfg.dropout = dropout;
  cfg.context = {context, context, base_dims};
  return cfg;
}

LanguageData RandomLanguage(const std::string &id, int classes, int utts, int frames,
                            int dims, Rng &rng) {
  LanguageData d;
  d.language_id = id;
  for (int u = 0; u < utts; ++u) {
    d.utterances.push_back(testing::RandomMatrix(id + std::to_string(u), frames, dims, rng));
    std::vector<int> labels(frames);
    for (auto &l : labels) l = rng.Int(0, classes - 1);
    d.labels.push_back(labels);
  }
  return d;
}

TrainBatch MakeBatch(const Model &m, const std::vector<LanguageData> &langs,
                     const std::vector<LabelledSample> &samples) {
  std::vector<const LanguageData *> ptrs;
  std::vector<int> heads;
  for (const auto &l : langs) {
    ptrs.push_back(&l);
    heads.push_back(m.HeadIndex(l.language_id));
  }
  return AssembleBatch(m, ptrs, heads, samples);
}

TEST(Multitask, HeadsOfOtherLanguagesGetZeroGradient) {
  Rng rng(4);
  std::vector<LanguageData> langs = {RandomLanguage("A", 5, 2, 20, 6, rng),
                                     RandomLanguage("B", 7, 2, 20, 6, rng),
                                     RandomLanguage("C", 4, 2, 20, 6, rng)};
  auto m = BuildFfn({{"A", 5}, {"B", 7}, {"C", 4}}, TinyFfn(6, 16, 0.1f, 1));
  for (int lang = 0; lang < 3; ++lang) {
    std::vector<LabelledSample> samples;
    for (int i = 0; i < 12; ++i) samples.push_back({lang, {i % 2, i}});
    m.ComputeGradients(MakeBatch(m, langs, samples), rng);
    for (int h = 0; h < 3; ++h) {
      bool any_nonzero = false;
      for (auto *p : m.HeadParams(h))
        for (float g : p->grad.vec()) {
          if (h != lang) EXPECT_EQ(g, 0.0f);
          any_nonzero |= g != 0.0f;
        }
      EXPECT_EQ(any_nonzero, h == lang);
    }
  }
}

TEST(Multitask, TrunkGradientIsSumOverLanguages) {
  Rng rng(5);
  std::vector<LanguageData> langs = {RandomLanguage("A", 5, 1, 30, 4, rng),
                                     RandomLanguage("B", 3, 1, 30, 4, rng)};
  auto m = BuildFfn({{"A", 5}, {"B", 3}}, TinyFfn(4, 16, 0.0f, 2));
  std::vector<LabelledSample> mixed, only[2];
  for (int i = 0; i < 10; ++i) {
    mixed.push_back({i % 2, {0, i}});
    only[i % 2].push_back({i % 2, {0, i}});
  }
  auto snapshot = [&] {
    std::vector<double> g;
    for (auto *p : m.TrunkParams())
      for (float v : p->grad.vec()) g.push_back(v);
    return g;
  };
  m.ComputeGradients(MakeBatch(m, langs, mixed), rng);
  auto total = snapshot();
  std::vector<double> sum(total.size(), 0.0);
  for (int l = 0; l < 2; ++l) {
    m.ComputeGradients(MakeBatch(m, langs, only[l]), rng);
    auto part = snapshot();
    // Sub-batch losses are averaged over their own size.
    const double w = static_cast<double>(only[l].size()) / mixed.size();
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += w * part[i];
  }
  double max_abs = 0;
  for (double v : total) max_abs = std::max(max_abs, std::abs(v));
  ASSERT_GT(max_abs, 0.0);
  for (std::size_t i = 0; i < sum.size(); ++i) EXPECT_NEAR(sum[i], total[i], 1e-5 * max_abs);
}

TEST(Sampler, ThreeLanguagesGiveEightyFivePerLanguage) {
  std::vector<std::vector<SampleRef>> refs(3);
  for (int l = 0; l < 3; ++l)
    for (int i = 0; i < 300 + 100 * l; ++i) refs[l].push_back({0, i});
  MultilingualSampler sampler(refs, 255);
  EXPECT_EQ(sampler.per_language(), 85);
  EXPECT_EQ(sampler.batches_per_epoch(), 6);  // ceil(500 / 85)
  Rng rng(6);
  for (const auto &batch : sampler.Epoch(rng)) {
    ASSERT_EQ(batch.size(), 255u);
    int count[3] = {};
    for (const auto &s : batch) ++count[s.language];
    for (int c : count) EXPECT_EQ(c, 85);
  }
}

TEST(Sampler, LargestLanguageSeenOncePerEpoch) {
  std::vector<std::vector<SampleRef>> refs(2);
  for (int i = 0; i < 40; ++i) refs[0].push_back({0, i});
  for (int i = 0; i < 7; ++i) refs[1].push_back({0, i});
  MultilingualSampler sampler(refs, 20);
  Rng rng(7);
  std::vector<int> seen(40, 0);
  for (const auto &batch : sampler.Epoch(rng))
    for (const auto &s : batch)
      if (s.language == 0) ++seen[s.ref.frame];
  for (int v : seen) EXPECT_EQ(v, 1);
}

TEST(Sampler, BatchSmallerThanLanguageCount) {
  std::vector<std::vector<SampleRef>> refs(3, {{0, 0}});
  EXPECT_THROW(MultilingualSampler(refs, 2), ConfigError);
}

// Two Gaussian blobs at +mu and -mu.
LanguageData Blobs(const std::string &id, int frames, Rng &rng) {
  const float mu[4] = {2.0f, -1.0f, 0.5f, -1.5f};
  LanguageData d;
  d.language_id = id;
  FeatureMatrix f(id + "-blobs", frames, 4);
  std::vector<int> labels(frames);
  for (int t = 0; t < frames; ++t) {
    labels[t] = rng.Int(0, 1);
    for (int k = 0; k < 4; ++k)
      f(t, k) = static_cast<float>((labels[t] ? mu[k] : -mu[k]) + rng.Normal(0.0, 0.8));
  }
  d.utterances.push_back(f);
  d.labels.push_back(labels);
  return d;
}

double NearestCentroidAccuracy(const LanguageData &train, const LanguageData &dev) {
  double c[2][4] = {}, n[2] = {};
  const auto &f = train.utterances[0];
  for (std::size_t t = 0; t < f.frames(); ++t) {
    int y = train.labels[0][t];
    n[y] += 1;
    for (int k = 0; k < 4; ++k) c[y][k] += f(t, k);
  }
  for (int y = 0; y < 2; ++y)
    for (int k = 0; k < 4; ++k) c[y][k] /= n[y];
  const auto &g = dev.utterances[0];
  int correct = 0;
  for (std::size_t t = 0; t < g.frames(); ++t) {
    double d[2] = {};
    for (int y = 0; y < 2; ++y)
      for (int k = 0; k < 4; ++k) d[y] += std::pow(g(t, k) - c[y][k], 2);
    correct += (d[1] < d[0]) == (dev.labels[0][t] == 1);
  }
  return static_cast<double>(correct) / g.frames();
}

TEST(Training, OneEpochSeparatesBlobs) {
  Rng rng(8);
  std::vector<LanguageData> train = {Blobs("X", 20000, rng)};
  std::vector<LanguageData> dev = {Blobs("X", 1000, rng)};
  const double baseline = NearestCentroidAccuracy(train[0], dev[0]);
  EXPECT_GT(baseline, 0.9);
  auto m = BuildFfn({{"X", 2}}, TinyFfn(4, 32, 0.1f), 9);
  TrainOptions opts;
  opts.epochs = 1;
  opts.seed = 10;
  std::vector<EpochStats> stats;
  Train(&m, train, dev, opts, [&](const EpochStats &s) { stats.push_back(s); });
  ASSERT_EQ(stats.size(), 1u);
  EXPECT_GT(stats[0].dev_accuracy, 0.9) << "nearest-centroid baseline " << baseline;
  double acc = 0;
  DevLoss(m, dev, &acc);
  EXPECT_DOUBLE_EQ(acc, stats[0].dev_accuracy);
}

TEST(Training, MemorisesSmallSet) {
  Rng rng(11);
  std::vector<LanguageData> train = {RandomLanguage("M", 10, 1, 100, 13, rng)};
  auto m = BuildFfn({{"M", 10}}, TinyFfn(13, 128, 0.0f), 12);
  TrainOptions opts;
  opts.epochs = 200;
  opts.batch_size = 20;
  opts.seed = 13;
  opts.lr_floor = 1e-3;
  auto result = Train(&m, train, train, opts);
  ASSERT_EQ(result.epochs.size(), 200u);
  double best = 1e9;
  for (const auto &e : result.epochs) best = std::min(best, e.train_loss);
  EXPECT_LT(best, 0.05);
  EXPECT_LT(result.epochs.back().dev_loss, 0.05);
}

TEST(Training, ScheduleStaysInRange) {
  Rng rng(14);
  std::vector<LanguageData> train = {RandomLanguage("R", 4, 2, 60, 5, rng)};
  std::vector<LanguageData> dev = {RandomLanguage("R", 4, 1, 40, 5, rng)};
  auto m = BuildFfn({{"R", 4}}, TinyFfn(5, 16, 0.1f), 1);
  TrainOptions opts;
  opts.epochs = 15;
  opts.batch_size = 16;
  auto result = Train(&m, train, dev, opts);
  for (std::size_t i = 0; i < result.epochs.size(); ++i) {
    EXPECT_LE(result.epochs[i].lr, 1e-3);
    EXPECT_GE(result.epochs[i].lr, 1e-4);
    if (i) EXPECT_LE(result.epochs[i].lr, result.epochs[i - 1].lr);
  }
}

TEST(Training, MissingHeadAndEmptySplitThrow) {
  Rng rng(15);
  std::vector<LanguageData> train = {RandomLanguage("Z", 3, 1, 10, 5, rng)};
  auto m = BuildFfn({{"Y", 3}}, TinyFfn(5, 8), 1);
  EXPECT_THROW(Train(&m, train, train, {}), DataError);
  auto ok = BuildFfn({{"Z", 3}}, TinyFfn(5, 8), 1);
  EXPECT_THROW(Train(&ok, {}, train, {}), DataError);
}

std::string Slurp(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

Model TrainSmall(uint64_t seed, Architecture arch) {
  Rng rng(16);
  std::vector<LanguageData> train = {RandomLanguage("A", 4, 2, 40, 39, rng),
                                     RandomLanguage("B", 3, 2, 30, 39, rng)};
  std::vector<LanguageData> dev = {RandomLanguage("A", 4, 1, 20, 39, rng),
                                   RandomLanguage("B", 3, 1, 20, 39, rng)};
  Model m;
  if (arch == Architecture::kFfn) {
    m = BuildFfn({{"A", 4}, {"B", 3}}, TinyFfn(39, 24, 0.1f, 2), seed);
  } else {
    ResnetConfig cfg;
    cfg.stem_channels = 4;
    cfg.stage_channels = {4, 256};
    cfg.context = 2;
    m = BuildResnet({{"A", 4}, {"B", 3}}, cfg, seed);
  }
  TrainOptions opts;
  opts.epochs = 2;
  opts.batch_size = 16;
  opts.seed = seed;
  Train(&m, train, dev, opts);
  return m;
}

TEST(Checkpoint, SameSeedGivesIdenticalCheckpoints) {
  testing::TempDir dir;
  for (auto arch : {Architecture::kFfn, Architecture::kResnet}) {
    TrainSmall(3, arch).Save(dir.File("a.qbem"));
    TrainSmall(3, arch).Save(dir.File("b.qbem"));
    TrainSmall(4, arch).Save(dir.File("c.qbem"));
    EXPECT_EQ(Slurp(dir.File("a.qbem")), Slurp(dir.File("b.qbem")));
    EXPECT_NE(Slurp(dir.File("a.qbem")), Slurp(dir.File("c.qbem")));
  }
}

TEST(Checkpoint, SaveLoadRoundTripIsBitExact) {
  testing::TempDir dir;
  for (auto arch : {Architecture::kFfn, Architecture::kResnet}) {
    auto m = TrainSmall(5, arch);
    m.Save(dir.File("m.qbem"));
    auto back = Model::Load(dir.File("m.qbem"));
    EXPECT_EQ(back.architecture(), m.architecture());
    EXPECT_EQ(back.input_spec(), m.input_spec());
    EXPECT_EQ(back.bottleneck_index(), m.bottleneck_index());
    EXPECT_EQ(back.heads().size(), m.heads().size());
    auto pa = m.Params(), pb = back.Params();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      EXPECT_EQ(pa[i]->value.shape(), pb[i]->value.shape());
      EXPECT_EQ(pa[i]->value.vec(), pb[i]->value.vec());
    }
    back.Save(dir.File("again.qbem"));
    EXPECT_EQ(Slurp(dir.File("m.qbem")), Slurp(dir.File("again.qbem")));
  }
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  testing::TempDir dir;
  TrainSmall(6, Architecture::kFfn).Save(dir.File("m.qbem"));
  auto bytes = Slurp(dir.File("m.qbem"));
  {
    std::ofstream os(dir.File("trunc.qbem"), std::ios::binary);
    os << bytes.substr(0, bytes.size() / 2);
  }
  EXPECT_THROW(Model::Load(dir.File("trunc.qbem")), DataError);
  bytes[0] = 'X';
  {
    std::ofstream os(dir.File("magic.qbem"), std::ios::binary);
    os << bytes;
  }
  EXPECT_THROW(Model::Load(dir.File("magic.qbem")), DataError);
  EXPECT_THROW(Model::Load(dir.File("none.qbem")), DataError);
}

TEST(Extraction, ShapeAndPurity) {
  for (auto arch : {Architecture::kFfn, Architecture::kResnet}) {
    auto m = TrainSmall(7, arch);
    Rng rng(17);
    auto feats = testing::RandomMatrix("u", 23, 39, rng);
    for (std::size_t k = 0; k < 39; ++k)
      for (std::size_t t = 10; t < 20; ++t) feats(t, k) = feats(10, k);
    auto b = m.ExtractBottleneck(feats);
    EXPECT_EQ(b.frames(), 23u);
    EXPECT_EQ(b.dims(), 32u);
    EXPECT_EQ(b.id(), "u");
    EXPECT_TRUE(b.AllFinite());
    // Frames whose whole context window is constant see identical input.
    for (std::size_t t = 13; t < 17; ++t)
      for (std::size_t k = 0; k < 32; ++k) EXPECT_EQ(b(t, k), b(13, k));
    EXPECT_EQ(m.ExtractBottleneck(feats), b);
    m.DropHeads();
    EXPECT_TRUE(m.heads().empty());
    EXPECT_EQ(m.ExtractBottleneck(feats), b);
  }
}

TEST(Extraction, DimensionMismatchThrows) {
  auto m = BuildFfn({{"A", 3}}, TinyFfn(39, 8));
  EXPECT_THROW(m.ExtractBottleneck(FeatureMatrix("u", 5, 13)), DataError);
}

}  // namespace
}  // namespace qbe
