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

#include <filesystem>
#include <random>
#include <string>

#include "fitrank/embedder.hpp"

namespace fitrank::testing {

/// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fitrank_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Vector random_unit(Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = g(rng);
  return v.normalized();
}

/// Store with `ids` mapped to seeded random unit vectors.
inline EmbeddingStore random_store(const std::vector<DocId>& ids, Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  EmbeddingStore s("test", dim);
  for (const auto& id : ids) s.insert({id, random_unit(dim, rng), "test", false});
  return s;
}

inline std::vector<DocId> numbered(char prefix, std::size_t n) {
  std::vector<DocId> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace fitrank::testing
