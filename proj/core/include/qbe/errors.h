// core/include/qbe/errors.h

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

#ifndef QBE_ERRORS_H_
#define QBE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace qbe {

// Bad or missing configuration. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data. CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistic is undefined on the given data (no targets, zero variance).
// CLI exit code 4.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArchiveError : public DataError {
 public:
  enum class Kind { kIo, kBadMagic, kTruncated, kDuplicateId, kBadRecord };

  ArchiveError(Kind kind, const std::string &what)
      : DataError(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace qbe

#endif  // QBE_ERRORS_H_
