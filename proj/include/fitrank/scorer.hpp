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
#include <span>
#include <vector>

#include "fitrank/adapter.hpp"
#include "fitrank/common.hpp"
#include "fitrank/embedder.hpp"

namespace fitrank {

/// Projects each column of X through W and rescales it to unit length.
/// Throws ValidationError if a projected column vanishes.
template <typename Scalar>
MatrixX<Scalar> project_columns(const MatrixX<Scalar>& W, const MatrixX<Scalar>& X) {
  if (W.cols() != X.rows()) {
    throw ValidationError("dimension mismatch: adapter expects " + std::to_string(W.cols()) +
                          ", embeddings have " + std::to_string(X.rows()));
  }
  MatrixX<Scalar> U = W * X;
  for (Index c = 0; c < U.cols(); ++c) {
    const Scalar n = U.col(c).norm();
    if (!(n > Scalar(0))) throw ValidationError("adapter maps an embedding to zero");
    U.col(c) /= n;
  }
  return U;
}

/// cos(g(r), g(j)) / T with g(x) = W x / |W x|.
double score(const Vector& resume, const Vector& job, const AdapterParams& adapter);

/// Raw cosine after projection, without the temperature.
double projected_cosine(const Vector& resume, const Vector& job, const AdapterParams& adapter);

/// Temperature-scaled scores, resumes as rows and jobs as columns.
struct ScoreMatrix {
  std::vector<DocId> row_ids;
  std::vector<DocId> col_ids;
  Matrix scores;
};

ScoreMatrix score_matrix(const EmbeddingStore& store, std::span<const DocId> resume_ids,
                         std::span<const DocId> job_ids, const AdapterParams& adapter);

/// Header line {"col_ids": [...]} then one {"resume_id", "scores"} line per row.
void write_score_matrix(const ScoreMatrix& m, const std::filesystem::path& path);
ScoreMatrix read_score_matrix(const std::filesystem::path& path);

struct ScoredCandidate {
  DocId id;
  double score = 0.0;

  bool operator==(const ScoredCandidate&) const = default;
};

/// Candidates in descending score order.
struct RankingResult {
  DocId query_id;
  std::vector<ScoredCandidate> ranked;
};

/// Strict ordering used by every ranking: higher score first, then ascending id.
inline bool ranks_before(const ScoredCandidate& a, const ScoredCandidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

/// The k best of `scored` (all of them when k >= size) under ranks_before.
RankingResult top_k(const DocId& query_id, std::vector<ScoredCandidate> scored, std::size_t k);

/// Scores `candidates` against the query embedding and keeps the k best.
RankingResult top_k(const DocId& query_id, std::span<const DocId> candidates, std::size_t k,
                    const EmbeddingStore& store, const AdapterParams& adapter);

}  // namespace fitrank
