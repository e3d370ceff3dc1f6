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

#include <cstdint>
#include <filesystem>
#include <map>
#include <unordered_map>
#include <vector>

#include "fitrank/common.hpp"
#include "fitrank/corpus.hpp"
#include "fitrank/embedder.hpp"
#include "fitrank/evalreport.hpp"

namespace fitrank {

/// Parameters of a planted resume-job world. Every document gets a hidden
/// Gaussian latent; a pair is compatible iff the latent cosine reaches
/// `accept_threshold`.
struct SyntheticSpec {
  std::size_t n_resumes = 500;
  std::size_t n_jobs = 200;
  std::size_t latent_dim = 8;
  double label_density = 0.02;
  double accept_threshold = 0.5;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  // Base embedding layout: scaled latent, a resume/job offset axis and
  // isotropic nuisance, mixed by a random rotation.
  std::size_t embedding_dim = 16;
  double nuisance_scale = 1.5;
  double kind_offset = 2.0;

  // Per-job split assignment; the remainder goes to test.
  double train_fraction = 0.7;
  double valid_fraction = 0.15;

  void validate() const;
  json to_json() const;
  static SyntheticSpec from_json(const json& j);
};

/// Dense 0/1 compatibility over all resume x job pairs.
class CompatibilityMatrix {
 public:
  CompatibilityMatrix() = default;
  CompatibilityMatrix(std::vector<DocId> resume_ids, std::vector<DocId> job_ids);

  void set(std::size_t r, std::size_t j, bool value) { values_(r, j) = value ? 1 : 0; }
  bool at(std::size_t r, std::size_t j) const { return values_(r, j) != 0; }
  /// Throws Error on an id outside the matrix.
  bool compatible(const DocId& resume_id, const DocId& job_id) const;

  const std::vector<DocId>& resume_ids() const { return resume_ids_; }
  const std::vector<DocId>& job_ids() const { return job_ids_; }
  std::size_t positives() const;

  void save(const std::filesystem::path& path) const;
  static CompatibilityMatrix load(const std::filesystem::path& path);

 private:
  std::vector<DocId> resume_ids_;
  std::vector<DocId> job_ids_;
  std::unordered_map<DocId, std::size_t> resume_index_;
  std::unordered_map<DocId, std::size_t> job_index_;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> values_;
};

struct SyntheticCorpus {
  Corpus corpus;
  CompatibilityMatrix ground_truth;
  Matrix resume_latents;  // latent_dim x n_resumes
  Matrix job_latents;     // latent_dim x n_jobs
  EmbeddingStore embeddings;
  std::map<DocId, Split> job_split;
};

/// Deterministic given spec.seed.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

/// The q-quantile (q in [0,1]) of latent cosines over all resume x job pairs
/// of the world `spec` would generate.
double latent_cosine_quantile(const SyntheticSpec& spec, double q);

/// Held-out evaluation against the planted compatibility. rank_resume: the
/// jobs assigned to `split` query the full resume pool. rank_job: every
/// resume queries the jobs of `split`. Queries without a compatible
/// candidate are dropped.
EvalTask ground_truth_task(const SyntheticCorpus& s, TaskDirection direction, Split split,
                           std::size_t k);

/// Writes documents.jsonl, labels.jsonl, embeddings.jsonl, ground_truth.jsonl
/// and spec.json into `dir`.
void save_synthetic(const SyntheticCorpus& s, const SyntheticSpec& spec,
                    const std::filesystem::path& dir);

}  // namespace fitrank
