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
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fitrank/adapter.hpp"
#include "fitrank/corpus.hpp"
#include "fitrank/embedder.hpp"
#include "fitrank/scorer.hpp"

namespace fitrank {

enum class TaskDirection {
  rank_resume,  // query = job, candidates = resumes
  rank_job,     // query = resume, candidates = jobs
};

std::string_view to_string(TaskDirection d);
TaskDirection parse_task_direction(std::string_view s);

struct EvalTask {
  TaskDirection direction = TaskDirection::rank_resume;
  std::vector<DocId> queries;
  std::vector<DocId> candidate_pool;
  std::map<DocId, std::set<DocId>> relevant;
  std::size_t k = 10;

  /// Every query has at least one relevant id and all relevant ids are in the pool.
  void validate() const;
};

/// Builds a task from the label-1 pairs of `labels`: queries are the docs on
/// the query side with at least one positive, in first-seen order.
EvalTask make_task(TaskDirection direction, const LabelSet& labels,
                   std::vector<DocId> candidate_pool, std::size_t k);

/// |relevant ∩ top-K| / |relevant|. Throws on empty `relevant`.
double recall_at_k(const RankingResult& ranked, const std::set<DocId>& relevant, std::size_t k);

/// Binary-gain nDCG@K with log2(rank + 1) discount, normalized by the ideal
/// ordering of min(|relevant|, K) hits. Throws on empty `relevant`.
double ndcg_at_k(const RankingResult& ranked, const std::set<DocId>& relevant, std::size_t k);

struct QueryMetrics {
  DocId query_id;
  double recall = 0.0;
  double ndcg = 0.0;
};

struct MetricsReport {
  std::string task;
  std::size_t k = 0;
  json adapter_provenance = json::object();
  std::vector<QueryMetrics> per_query;
  double macro_recall = 0.0;
  double macro_ndcg = 0.0;
  /// Full rankings (whole pool) per query, in query order.
  std::vector<RankingResult> rankings;
};

/// Ranks the whole pool for each query and averages per-query metrics at task.k.
MetricsReport evaluate(const EvalTask& task, const AdapterParams& adapter,
                       const EmbeddingStore& embeddings);

json report_to_json(const MetricsReport& report);
void write_report(const MetricsReport& report, const std::filesystem::path& path);

/// Aligned text table, one row per report: Task | Recall@K | nDCG@K (percent).
std::string format_metrics_table(const std::vector<MetricsReport>& reports);

struct BiasReport {
  std::string attribute;
  std::size_t top_n = 10;
  /// Group -> share of attributed top-N slots, macro-averaged over queries.
  std::map<std::string, double> topn_share;
  /// Group -> share among attributed corpus documents.
  std::map<std::string, double> corpus_share;
  std::size_t queries_used = 0;
  std::size_t queries_skipped = 0;
};

/// Group shares among the top-`top_n` attributed candidates per query.
/// `corpus_ids` (may be empty) defines the corpus-level distribution.
BiasReport bias_report(const std::vector<RankingResult>& rankings,
                       const std::map<DocId, std::string>& attributes, std::string attribute,
                       const std::vector<DocId>& corpus_ids = {}, std::size_t top_n = 10);

/// Table-style rendering: "Method | <group>(%) ..." with two decimals.
std::string format_bias_table(const std::vector<std::pair<std::string, BiasReport>>& rows);
json bias_to_json(const BiasReport& report);

/// attributes.jsonl rows {"doc_id", "attribute", "value"} filtered to one attribute.
std::map<DocId, std::string> load_attributes(const std::filesystem::path& path,
                                             const std::string& attribute);

}  // namespace fitrank
