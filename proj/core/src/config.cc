// core/src/config.cc

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

#include "qbe/config.h"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "qbe/errors.h"

namespace qbe {

namespace {

Config FromStream(std::istream &is, const std::string &origin) {
  Config cfg;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(is);
  } catch (const CLI::Error &e) {
    throw ConfigError(origin + ": " + e.what());
  }
  for (const auto &item : items) {
    if (item.name == "++" || item.name == "--") continue;
    std::string value;
    for (const auto &in : item.inputs) value += (value.empty() ? "" : " ") + in;
    cfg.Set(item.fullname(), value);
  }
  return cfg;
}

template <typename T>
T ParseNumber(const std::string &key, const std::string &s) {
  std::istringstream is(s);
  T v{};
  if (!(is >> v) || !(is >> std::ws).eof())
    throw ConfigError("config key '" + key + "': cannot parse '" + s + "'");
  return v;
}

}  // namespace

Config Config::Load(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  return FromStream(is, path);
}

Config Config::Parse(const std::string &text, const std::string &origin) {
  std::istringstream is(text);
  return FromStream(is, origin);
}

void Config::Set(const std::string &key, const std::string &value) { values_[key] = value; }

std::string Config::GetString(const std::string &key, const std::string &def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

int Config::GetInt(const std::string &key, int def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : ParseNumber<int>(key, it->second);
}

uint64_t Config::GetUint64(const std::string &key, uint64_t def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  if (!it->second.empty() && it->second[0] == '-')
    throw ConfigError("config key '" + key + "': must be non-negative");
  return ParseNumber<uint64_t>(key, it->second);
}

double Config::GetDouble(const std::string &key, double def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : ParseNumber<double>(key, it->second);
}

bool Config::GetBool(const std::string &key, bool def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  const std::string &v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<std::string> Config::GetList(const std::string &key,
                                         const std::vector<std::string> &def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  std::vector<std::string> out;
  std::string cur;
  for (char c : it->second + " ") {
    if (c == ' ' || c == ',' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  return out;
}

std::vector<int> Config::GetIntList(const std::string &key, const std::vector<int> &def) const {
  if (!Has(key)) return def;
  std::vector<int> out;
  for (const auto &s : GetList(key, {})) out.push_back(ParseNumber<int>(key, s));
  return out;
}

void Config::CheckKnown(const std::set<std::string> &known) const {
  for (const auto &[key, _] : values_)
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
}

std::string Config::Canonical() const {
  std::string out;
  for (const auto &[key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

std::string Config::Hash() const {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : Canonical()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qbe
