// Copyright 2026 The fitrank Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fitrank/common.hpp"

namespace fitrank {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;

  void validate() const;
};

/// Splits on whitespace, lowercases ASCII, and emits every CJK code point as
/// its own token. Other bytes are kept verbatim.
std::vector<std::string> tokenize(std::string_view text);

/// Okapi BM25 over a fixed document collection.
class Bm25Index {
 public:
  explicit Bm25Index(std::span<const std::string> docs, Bm25Params params = {});

  /// One score per document, in collection order. Repeated query terms count once.
  std::vector<double> score(std::string_view query) const;

  std::size_t size() const { return doc_len_.size(); }
  double idf(const std::string& term) const;

 private:
  Bm25Params params_;
  std::vector<double> doc_len_;
  double avg_len_ = 0.0;
  std::vector<std::unordered_map<std::string, int>> tf_;
  std::unordered_map<std::string, int> df_;
};

std::vector<double> bm25_score(std::string_view query, std::span<const std::string> docs,
                               Bm25Params params = {});

}  // namespace fitrank
