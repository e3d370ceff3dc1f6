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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fitrank/augment.hpp"
#include "fitrank/embedder.hpp"
#include "fitrank/evalreport.hpp"
#include "fitrank/miner.hpp"
#include "fitrank/trainer.hpp"

namespace fitrank {

/// Everything one experiment run depends on. Relative paths resolve against
/// the working directory.
struct RunConfig {
  std::optional<std::uint64_t> seed;

  std::filesystem::path corpus_dir;   // documents.jsonl + labels.jsonl
  std::filesystem::path embeddings;   // pre-built vectors for the file provider
  std::filesystem::path ledger;       // augmentations.jsonl to replay
  std::filesystem::path attributes;   // attributes.jsonl for bias analysis
  std::filesystem::path out_dir;

  // embedder
  std::string embed_provider = "random-projection";  // random-projection | file | http
  Index embed_dim = 64;
  std::string embed_url;
  std::string embed_model;

  // HyRe
  bool augment = true;
  std::string augment_target = "job";
  std::size_t n_shots = 1;
  std::string llm_provider = "echo";  // echo | http | ledger
  std::string llm_model = "echo";
  std::string llm_url;
  double llm_temperature = 0.0;

  // mining
  MiningStrategy mining_strategy = MiningStrategy::rum;
  PercentileRange range;
  std::size_t n_per_anchor = 2;
  std::size_t bm25_k = 10;
  bool mining_global = false;

  TrainConfig train;
  int iterations = 2;  // 1 = bootstrap only; each further one mines and retrains
  bool continue_training = false;

  std::vector<TaskDirection> tasks{TaskDirection::rank_resume, TaskDirection::rank_job};
  std::vector<std::size_t> k_values{10};
  std::string bias_attribute = "gender";

  json to_json() const;
  /// Missing keys keep their defaults; unknown enum strings throw.
  static RunConfig from_json(const json& j);
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Every violated constraint, in a fixed order. Empty means valid.
std::vector<std::string> validate_config(const RunConfig& config);

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const RunConfig& config);
std::unique_ptr<LlmClient> make_llm_client(const RunConfig& config);

struct PipelineReport {
  std::vector<MetricsReport> reports;
  std::optional<BiasReport> bias;
  std::vector<double> validation_ndcg;  // best validation score per iteration, if any
  std::size_t llm_calls = 0;
  std::size_t embed_calls = 0;
  std::vector<std::string> reused;  // artifacts loaded instead of recomputed
  json manifest;
};

/// augment -> embed -> bootstrap train -> (mine -> retrain) x (iterations-1)
/// -> eval -> bias. Artifacts go to config.out_dir and are reused on a rerun
/// with the same config and inputs. Stage failures are rethrown with the
/// stage name; artifacts written so far stay on disk.
PipelineReport run_pipeline(const RunConfig& config);

/// Same, with caller-supplied providers (tests, offline replays).
PipelineReport run_pipeline(const RunConfig& config, LlmClient* llm, EmbeddingProvider* embedder);

}  // namespace fitrank
