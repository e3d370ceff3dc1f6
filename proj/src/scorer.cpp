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

#include "fitrank/scorer.hpp"

#include <algorithm>

namespace fitrank {

namespace {

Vector project_one(const Vector& x, const AdapterParams& adapter) {
  if (x.size() != adapter.dim()) {
    throw ValidationError("dimension mismatch: adapter expects " + std::to_string(adapter.dim()) +
                          ", embedding has " + std::to_string(x.size()));
  }
  Vector u = adapter.W * x;
  const double n = u.norm();
  if (!(n > 0.0)) throw ValidationError("adapter maps an embedding to zero");
  return u / n;
}

}  // namespace

double projected_cosine(const Vector& resume, const Vector& job, const AdapterParams& adapter) {
  const double c = project_one(resume, adapter).dot(project_one(job, adapter));
  return std::clamp(c, -1.0, 1.0);
}

double score(const Vector& resume, const Vector& job, const AdapterParams& adapter) {
  return projected_cosine(resume, job, adapter) / adapter.temperature;
}

ScoreMatrix score_matrix(const EmbeddingStore& store, std::span<const DocId> resume_ids,
                         std::span<const DocId> job_ids, const AdapterParams& adapter) {
  if (resume_ids.empty() || job_ids.empty()) throw ValidationError("score_matrix needs both sides");
  const Matrix R = project_columns(adapter.W, store.stack(resume_ids));
  const Matrix J = project_columns(adapter.W, store.stack(job_ids));
  ScoreMatrix m{{resume_ids.begin(), resume_ids.end()}, {job_ids.begin(), job_ids.end()}, {}};
  m.scores = (R.transpose() * J).cwiseMax(-1.0).cwiseMin(1.0) / adapter.temperature;
  return m;
}

void write_score_matrix(const ScoreMatrix& m, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  write_jsonl_line(out, json{{"col_ids", m.col_ids}});
  for (Index r = 0; r < m.scores.rows(); ++r) {
    std::vector<double> row(m.scores.cols());
    for (Index c = 0; c < m.scores.cols(); ++c) row[c] = m.scores(r, c);
    write_jsonl_line(out, json{{"resume_id", m.row_ids[r]}, {"scores", row}});
  }
}

ScoreMatrix read_score_matrix(const std::filesystem::path& path) {
  ScoreMatrix m;
  std::vector<std::vector<double>> rows;
  for_each_jsonl(path, [&](const json& j, std::size_t lineno) {
    if (lineno == 1 || j.contains("col_ids")) {
      m.col_ids = j.at("col_ids").get<std::vector<DocId>>();
      return;
    }
    m.row_ids.push_back(j.at("resume_id").get<DocId>());
    rows.push_back(j.at("scores").get<std::vector<double>>());
    if (rows.back().size() != m.col_ids.size()) throw ValidationError("row length != col count");
  });
  m.scores.resize(static_cast<Index>(rows.size()), static_cast<Index>(m.col_ids.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m.scores(r, c) = rows[r][c];
  return m;
}

RankingResult top_k(const DocId& query_id, std::vector<ScoredCandidate> scored, std::size_t k) {
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    ranks_before);
  scored.resize(k);
  return {query_id, std::move(scored)};
}

RankingResult top_k(const DocId& query_id, std::span<const DocId> candidates, std::size_t k,
                    const EmbeddingStore& store, const AdapterParams& adapter) {
  if (candidates.empty()) return {query_id, {}};
  const Vector q = project_one(store.vector(query_id), adapter);
  const Matrix C = project_columns(adapter.W, store.stack(candidates));
  const Vector cos = (C.transpose() * q).cwiseMax(-1.0).cwiseMin(1.0);
  // Rank on cosine; dividing by T afterwards cannot reorder candidates.
  std::vector<ScoredCandidate> scored(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) scored[i] = {candidates[i], cos(static_cast<Index>(i))};
  auto result = top_k(query_id, std::move(scored), k);
  for (auto& c : result.ranked) c.score /= adapter.temperature;
  return result;
}

}  // namespace fitrank
