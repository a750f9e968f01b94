// benchmarks/qbe-bench.cc

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

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "qbe/feature-matrix.h"
#include "qbe/frontend.h"
#include "qbe/nn-layers.h"
#include "qbe/rng.h"
#include "qbe/search.h"

namespace qbe {
namespace {

FeatureMatrix Random(const std::string &id, std::size_t frames, std::size_t dims, Rng &rng) {
  FeatureMatrix m(id, frames, dims);
  for (auto &v : m.data()) v = static_cast<float>(rng.Normal(0.0, 1.0));
  return m;
}

Tensor<float> RandomTensor(std::vector<int> shape, Rng &rng) {
  Tensor<float> t(std::move(shape));
  for (auto &v : t.vec()) v = static_cast<float>(rng.Normal(0.0, 1.0));
  return t;
}

void BM_Similarity(benchmark::State &state) {
  Rng rng(1);
  auto q = Random("q", 50, 32, rng);
  auto d = Random("d", state.range(0), 32, rng);
  for (auto _ : state) benchmark::DoNotOptimize(Similarity(q, d));
  state.SetItemsProcessed(state.iterations() * 50 * state.range(0));
}
BENCHMARK(BM_Similarity)->Arg(500)->Arg(5000);

void BM_Dtw(benchmark::State &state) {
  Rng rng(2);
  auto sim = Similarity(Random("q", 50, 32, rng), Random("d", state.range(0), 32, rng));
  for (auto _ : state) benchmark::DoNotOptimize(DtwSubsequence(sim));
  state.SetItemsProcessed(state.iterations() * 50 * state.range(0));
}
BENCHMARK(BM_Dtw)->Arg(500)->Arg(5000);

void BM_SearchAll(benchmark::State &state) {
  Rng rng(3);
  std::vector<FeatureMatrix> queries, docs;
  for (int i = 0; i < 8; ++i) queries.push_back(Random("q" + std::to_string(i), 50, 32, rng));
  for (int i = 0; i < 8; ++i) docs.push_back(Random("d" + std::to_string(i), 1000, 32, rng));
  SearchOptions opts;
  opts.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(SearchAll(queries, docs, opts));
}
BENCHMARK(BM_SearchAll)->Arg(1)->Arg(4)->UseRealTime();

void BM_DenseForwardBackward(benchmark::State &state) {
  Rng rng(4);
  const int in = 507, out = static_cast<int>(state.range(0));
  auto layer = MakeLayer<float>(LayerSpec::Dense(in, out));
  layer->Initialize(rng);
  auto x = RandomTensor({255, in}, rng);
  auto g = RandomTensor({255, out}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(layer->Forward(x, rng));
    benchmark::DoNotOptimize(layer->Backward(g));
  }
}
BENCHMARK(BM_DenseForwardBackward)->Arg(128)->Arg(1024);

void BM_Conv3x3ForwardBackward(benchmark::State &state) {
  Rng rng(5);
  const int c = static_cast<int>(state.range(0));
  auto layer = MakeLayer<float>(LayerSpec::Conv3x3(c, c, 1));
  layer->Initialize(rng);
  auto x = RandomTensor({32, c, 39, 25}, rng);
  auto g = RandomTensor({32, c, 39, 25}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(layer->Forward(x, rng));
    benchmark::DoNotOptimize(layer->Backward(g));
  }
}
BENCHMARK(BM_Conv3x3ForwardBackward)->Arg(16);

void BM_Mfcc(benchmark::State &state) {
  Rng rng(6);
  std::vector<int16_t> pcm(16000);
  for (auto &s : pcm) s = static_cast<int16_t>(rng.Normal(0.0, 3000.0));
  for (auto _ : state) benchmark::DoNotOptimize(ComputeMfcc(pcm, 16000));
}
BENCHMARK(BM_Mfcc);

}  // namespace
}  // namespace qbe

BENCHMARK_MAIN();
