// core/src/binary-io.h

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

#ifndef QBE_SRC_BINARY_IO_H_
#define QBE_SRC_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "qbe/errors.h"

namespace qbe {
namespace internal {

// Explicit little-endian encoding, independent of host byte order.
class LeWriter {
 public:
  explicit LeWriter(std::ostream &os) : os_(os) {}

  template <typename T>
  void Put(T v) {
    static_assert(std::is_integral_v<T>);
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i)
      buf[i] = static_cast<unsigned char>((static_cast<uint64_t>(v) >> (8 * i)) & 0xff);
    os_.write(reinterpret_cast<const char *>(buf), sizeof(T));
  }
  void PutFloat(float f) { Put(std::bit_cast<uint32_t>(f)); }
  void PutBytes(const char *p, std::size_t n) {
    os_.write(p, static_cast<std::streamsize>(n));
  }
  void PutString16(const std::string &s) {
    Put(static_cast<uint16_t>(s.size()));
    PutBytes(s.data(), s.size());
  }

 private:
  std::ostream &os_;
};

class LeReader {
 public:
  LeReader(std::istream &is, std::string path) : is_(is), path_(std::move(path)) {}

  template <typename T>
  T Get(const char *what) {
    unsigned char buf[sizeof(T)];
    GetBytes(reinterpret_cast<char *>(buf), sizeof(T), what);
    uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
  }
  float GetFloat(const char *what) { return std::bit_cast<float>(Get<uint32_t>(what)); }
  void GetBytes(char *p, std::size_t n, const char *what) {
    is_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n)
      throw ArchiveError(ArchiveError::Kind::kTruncated,
                         path_ + ": truncated record (" + what + ")");
  }
  std::string GetString16(const char *what) {
    uint16_t len = Get<uint16_t>(what);
    std::string s(len, '\0');
    GetBytes(s.data(), len, what);
    return s;
  }
  const std::string &path() const { return path_; }

 private:
  std::istream &is_;
  std::string path_;
};

}  // namespace internal
}  // namespace qbe

#endif  // QBE_SRC_BINARY_IO_H_
