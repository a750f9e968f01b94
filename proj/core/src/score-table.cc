// core/src/score-table.cc

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

#include "qbe/score-table.h"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "qbe/errors.h"

namespace qbe {

void ScoreTable::Add(const std::string &query, const std::string &doc, double score) {
  if (!entries.emplace(TrialKey{query, doc}, score).second)
    throw DataError("duplicate score for pair (" + query + ", " + doc + ")");
}

std::vector<std::string> ScoreTable::QueryIds() const {
  std::vector<std::string> ids;
  for (const auto &[key, _] : entries)
    if (ids.empty() || ids.back() != key.first) ids.push_back(key.first);
  return ids;
}

void WriteScores(const ScoreTable &table, const std::string &path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  char buf[64];
  for (const auto &[key, score] : table.entries) {
    std::snprintf(buf, sizeof(buf), "%.6f", score);
    os << key.first << '\t' << key.second << '\t' << buf << '\n';
  }
  if (!os) throw DataError("write failed for " + path);
}

ScoreTable ReadScores(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  ScoreTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string q, d, s;
    if (!std::getline(ls, q, '\t') || !std::getline(ls, d, '\t') || !std::getline(ls, s))
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
    try {
      table.Add(q, d, std::stod(s));
    } catch (const std::invalid_argument &) {
      throw DataError(path + ":" + std::to_string(lineno) + ": bad score '" + s + "'");
    }
  }
  return table;
}

}  // namespace qbe
