// core/include/qbe/config.h

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

#ifndef QBE_CONFIG_H_
#define QBE_CONFIG_H_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace qbe {

// Flat "section.key" -> value store read from an INI file with [section]
// headers. List values are whitespace- or comma-separated.
class Config {
 public:
  Config() = default;

  // Throws ConfigError if the file cannot be read or parsed.
  static Config Load(const std::string &path);
  static Config Parse(const std::string &text, const std::string &origin = "<string>");

  void Set(const std::string &key, const std::string &value);
  bool Has(const std::string &key) const { return values_.count(key) > 0; }

  std::string GetString(const std::string &key, const std::string &def) const;
  int GetInt(const std::string &key, int def) const;
  uint64_t GetUint64(const std::string &key, uint64_t def) const;
  double GetDouble(const std::string &key, double def) const;
  bool GetBool(const std::string &key, bool def) const;
  std::vector<std::string> GetList(const std::string &key,
                                   const std::vector<std::string> &def) const;
  std::vector<int> GetIntList(const std::string &key, const std::vector<int> &def) const;

  // Throws ConfigError naming the first key not in known.
  void CheckKnown(const std::set<std::string> &known) const;

  // Sorted "key = value" lines; Hash() is FNV-1a 64 over them, in hex.
  std::string Canonical() const;
  std::string Hash() const;

  const std::map<std::string, std::string> &values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace qbe

#endif  // QBE_CONFIG_H_
