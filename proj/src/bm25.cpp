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

#include "fitrank/bm25.hpp"

#include <cctype>
#include <cmath>
#include <unordered_set>

namespace fitrank {

namespace {

bool is_cjk(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
         (cp >= 0x20000 && cp <= 0x2EBEF) || (cp >= 0xF900 && cp <= 0xFAFF) ||
         (cp >= 0x3000 && cp <= 0x30FF) || (cp >= 0xAC00 && cp <= 0xD7AF) ||
         (cp >= 0xFF00 && cp <= 0xFFEF);
}

// Length of the UTF-8 sequence starting with `lead`; 1 for invalid bytes.
std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

char32_t decode(std::string_view s, std::size_t pos, std::size_t len) {
  const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[pos + i]); };
  switch (len) {
    case 2: return ((byte(0) & 0x1F) << 6) | (byte(1) & 0x3F);
    case 3: return ((byte(0) & 0x0F) << 12) | ((byte(1) & 0x3F) << 6) | (byte(2) & 0x3F);
    case 4:
      return ((byte(0) & 0x07) << 18) | ((byte(1) & 0x3F) << 12) | ((byte(2) & 0x3F) << 6) |
             (byte(3) & 0x3F);
    default: return byte(0);
  }
}

}  // namespace

void Bm25Params::validate() const {
  if (!(k1 > 0.0)) throw ValidationError("bm25 k1 must be > 0");
  if (!(b >= 0.0 && b <= 1.0)) throw ValidationError("bm25 b must be in [0, 1]");
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) out.push_back(std::move(current));
    current.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = utf8_length(lead);
    if (i + len > text.size()) len = 1;
    if (len == 1) {
      if (lead == ' ' || lead == '\t' || lead == '\n' || lead == '\r' || lead == '\f' ||
          lead == '\v') {
        flush();
      } else {
        current.push_back(lead < 0x80 ? static_cast<char>(std::tolower(lead))
                                      : static_cast<char>(lead));
      }
    } else if (is_cjk(decode(text, i, len))) {
      flush();
      out.emplace_back(text.substr(i, len));
    } else {
      current.append(text.substr(i, len));
    }
    i += len;
  }
  flush();
  return out;
}

Bm25Index::Bm25Index(std::span<const std::string> docs, Bm25Params params) : params_(params) {
  params_.validate();
  if (docs.empty()) throw ValidationError("bm25 corpus is empty");
  tf_.reserve(docs.size());
  double total = 0.0;
  for (const auto& d : docs) {
    std::unordered_map<std::string, int> tf;
    const auto tokens = tokenize(d);
    for (const auto& t : tokens) ++tf[t];
    for (const auto& [t, _] : tf) ++df_[t];
    doc_len_.push_back(static_cast<double>(tokens.size()));
    total += static_cast<double>(tokens.size());
    tf_.push_back(std::move(tf));
  }
  avg_len_ = total / static_cast<double>(docs.size());
}

double Bm25Index::idf(const std::string& term) const {
  const double n = static_cast<double>(doc_len_.size());
  auto it = df_.find(term);
  const double df = it == df_.end() ? 0.0 : it->second;
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

std::vector<double> Bm25Index::score(std::string_view query) const {
  std::vector<double> scores(doc_len_.size(), 0.0);
  std::unordered_set<std::string> seen;
  for (const auto& term : tokenize(query)) {
    if (!seen.insert(term).second) continue;
    if (!df_.contains(term)) continue;
    const double w = idf(term);
    for (std::size_t d = 0; d < tf_.size(); ++d) {
      auto it = tf_[d].find(term);
      if (it == tf_[d].end()) continue;
      const double tf = it->second;
      const double norm = avg_len_ > 0.0 ? doc_len_[d] / avg_len_ : 0.0;
      scores[d] += w * tf * (params_.k1 + 1.0) /
                   (tf + params_.k1 * (1.0 - params_.b + params_.b * norm));
    }
  }
  return scores;
}

std::vector<double> bm25_score(std::string_view query, std::span<const std::string> docs,
                               Bm25Params params) {
  return Bm25Index(docs, params).score(query);
}

}  // namespace fitrank
