// core/include/qbe/rng.h

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

#ifndef QBE_RNG_H_
#define QBE_RNG_H_

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace qbe {

// The single random source threaded through every stochastic stage.
// Copying an Rng forks the stream; pass by reference to share it.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  double Uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double Normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  // Uniform integer in [lo, hi].
  int Int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }
  bool Bernoulli(double p) { return Uniform() < p; }
  uint64_t Next() { return engine_(); }

  template <typename T>
  void Shuffle(std::vector<T> *v) {
    std::shuffle(v->begin(), v->end(), engine_);
  }

  std::mt19937_64 &engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qbe

#endif  // QBE_RNG_H_
