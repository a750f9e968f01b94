// core/include/qbe/score-table.h

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

#ifndef QBE_SCORE_TABLE_H_
#define QBE_SCORE_TABLE_H_

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace qbe {

using TrialKey = std::pair<std::string, std::string>;  // (query_id, doc_id)

// At most one score per (query, document) pair, kept in key order so that
// output never depends on evaluation order.
struct ScoreTable {
  enum class State { kRaw, kZnormed };

  std::map<TrialKey, double> entries;
  State state = State::kRaw;

  std::size_t size() const { return entries.size(); }
  // Throws DataError if the pair is already present.
  void Add(const std::string &query, const std::string &doc, double score);
  std::vector<std::string> QueryIds() const;
};

// "query_id<TAB>doc_id<TAB>score" with six decimals, LF line ends.
void WriteScores(const ScoreTable &table, const std::string &path);
ScoreTable ReadScores(const std::string &path);

}  // namespace qbe

#endif  // QBE_SCORE_TABLE_H_
