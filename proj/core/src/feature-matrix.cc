// core/src/feature-matrix.cc

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

#include "qbe/feature-matrix.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_set>

#include "binary-io.h"
#include "qbe/errors.h"

namespace qbe {

FeatureMatrix::FeatureMatrix(std::string id, std::size_t frames,
                             std::size_t dims, std::vector<float> data)
    : id_(std::move(id)), frames_(frames), dims_(dims), data_(std::move(data)) {
  if (data_.size() != frames_ * dims_)
    throw DataError("FeatureMatrix '" + id_ + "': data size " +
                    std::to_string(data_.size()) + " != " +
                    std::to_string(frames_) + "x" + std::to_string(dims_));
}

FeatureMatrix FeatureMatrix::SelectRows(
    const std::vector<std::size_t> &rows) const {
  FeatureMatrix out(id_, rows.size(), dims_);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto src = Row(rows[r]);
    std::copy(src.begin(), src.end(), out.Row(r).begin());
  }
  return out;
}

bool FeatureMatrix::AllFinite() const {
  for (float v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace {

using internal::LeReader;
using internal::LeWriter;

constexpr char kMagic[4] = {'Q', 'B', 'E', '1'};

}  // namespace

void WriteArchive(const std::vector<FeatureMatrix> &features,
                  const std::string &path) {
  std::unordered_set<std::string> seen;
  for (const auto &f : features) {
    if (!seen.insert(f.id()).second)
      throw ArchiveError(ArchiveError::Kind::kDuplicateId,
                         path + ": duplicate utterance id '" + f.id() + "'");
    if (f.id().size() > std::numeric_limits<uint16_t>::max())
      throw ArchiveError(ArchiveError::Kind::kBadRecord,
                         path + ": utterance id too long");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os)
    throw ArchiveError(ArchiveError::Kind::kIo, "cannot open " + path + " for writing");
  LeWriter w(os);
  w.PutBytes(kMagic, 4);
  w.Put(static_cast<uint32_t>(features.size()));
  for (const auto &f : features) {
    w.Put(static_cast<uint16_t>(f.id().size()));
    w.PutBytes(f.id().data(), f.id().size());
    w.Put(static_cast<uint32_t>(f.frames()));
    w.Put(static_cast<uint32_t>(f.dims()));
    for (float v : f.data()) w.PutFloat(v);
  }
  if (!os)
    throw ArchiveError(ArchiveError::Kind::kIo, "write failed for " + path);
}

std::vector<FeatureMatrix> ReadArchive(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArchiveError(ArchiveError::Kind::kIo, "cannot open " + path);
  LeReader r(is, path);
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw ArchiveError(ArchiveError::Kind::kBadMagic, path + ": bad magic");
  uint32_t count = r.Get<uint32_t>("record count");
  std::vector<FeatureMatrix> out;
  std::unordered_set<std::string> seen;
  for (uint32_t n = 0; n < count; ++n) {
    uint16_t id_len = r.Get<uint16_t>("id length");
    std::string id(id_len, '\0');
    r.GetBytes(id.data(), id_len, "id");
    uint32_t frames = r.Get<uint32_t>("frames");
    uint32_t dims = r.Get<uint32_t>("dims");
    if (!seen.insert(id).second)
      throw ArchiveError(ArchiveError::Kind::kDuplicateId,
                         path + ": duplicate utterance id '" + id + "'");
    std::vector<float> data(static_cast<std::size_t>(frames) * dims);
    std::vector<char> raw(data.size() * 4);
    r.GetBytes(raw.data(), raw.size(), "data");
    for (std::size_t i = 0; i < data.size(); ++i) {
      uint32_t bits = 0;
      for (int b = 0; b < 4; ++b)
        bits |= static_cast<uint32_t>(static_cast<unsigned char>(raw[4 * i + b])) << (8 * b);
      data[i] = std::bit_cast<float>(bits);
    }
    out.emplace_back(std::move(id), frames, dims, std::move(data));
  }
  return out;
}

}  // namespace qbe
