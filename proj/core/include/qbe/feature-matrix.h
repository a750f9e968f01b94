// core/include/qbe/feature-matrix.h

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

#ifndef QBE_FEATURE_MATRIX_H_
#define QBE_FEATURE_MATRIX_H_

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qbe {

// Per-utterance [frames x dims] matrix, row-major, one row per 10 ms frame.
// This is what flows between the frontend, the networks, SAD and search.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::string id, std::size_t frames, std::size_t dims,
                float fill = 0.0f)
      : id_(std::move(id)), frames_(frames), dims_(dims),
        data_(frames * dims, fill) {}
  FeatureMatrix(std::string id, std::size_t frames, std::size_t dims,
                std::vector<float> data);

  const std::string &id() const { return id_; }
  void set_id(std::string id) { id_ = std::move(id); }
  std::size_t frames() const { return frames_; }
  std::size_t dims() const { return dims_; }
  bool empty() const { return frames_ == 0; }

  float &operator()(std::size_t t, std::size_t d) { return data_[t * dims_ + d]; }
  float operator()(std::size_t t, std::size_t d) const {
    return data_[t * dims_ + d];
  }

  std::span<float> Row(std::size_t t) {
    return {data_.data() + t * dims_, dims_};
  }
  std::span<const float> Row(std::size_t t) const {
    return {data_.data() + t * dims_, dims_};
  }

  std::vector<float> &data() { return data_; }
  const std::vector<float> &data() const { return data_; }

  // Keeps only the listed rows, in the given order.
  FeatureMatrix SelectRows(const std::vector<std::size_t> &rows) const;

  bool AllFinite() const;

  friend bool operator==(const FeatureMatrix &a, const FeatureMatrix &b) {
    return a.id_ == b.id_ && a.frames_ == b.frames_ && a.dims_ == b.dims_ &&
           a.data_ == b.data_;
  }

 private:
  std::string id_;
  std::size_t frames_ = 0;
  std::size_t dims_ = 0;
  std::vector<float> data_;
};

// Binary feature archive, little-endian:
//   "QBE1" | u32 count | { u16 id_len | id | u32 frames | u32 dims |
//                          frames*dims f32 row-major }*
void WriteArchive(const std::vector<FeatureMatrix> &features,
                  const std::string &path);
std::vector<FeatureMatrix> ReadArchive(const std::string &path);

}  // namespace qbe

#endif  // QBE_FEATURE_MATRIX_H_
