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

#include "fitrank/evalreport.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace fitrank {

std::string_view to_string(TaskDirection d) {
  return d == TaskDirection::rank_resume ? "rank_resume" : "rank_job";
}

TaskDirection parse_task_direction(std::string_view s) {
  if (s == "rank_resume") return TaskDirection::rank_resume;
  if (s == "rank_job") return TaskDirection::rank_job;
  throw ValidationError("unknown task " + std::string(s));
}

void EvalTask::validate() const {
  if (k == 0) throw ValidationError("task K must be >= 1");
  const std::set<DocId> pool(candidate_pool.begin(), candidate_pool.end());
  if (pool.size() != candidate_pool.size()) throw ValidationError("candidate pool has duplicates");
  for (const auto& q : queries) {
    auto it = relevant.find(q);
    if (it == relevant.end() || it->second.empty())
      throw ValidationError("query " + q + " has no relevant candidates");
    for (const auto& id : it->second)
      if (!pool.contains(id))
        throw ValidationError("relevant " + id + " of query " + q + " is not in the pool");
  }
}

EvalTask make_task(TaskDirection direction, const LabelSet& labels,
                   std::vector<DocId> candidate_pool, std::size_t k) {
  EvalTask task;
  task.direction = direction;
  task.candidate_pool = std::move(candidate_pool);
  task.k = k;
  for (const auto& [resume, job] : labels.positive_pairs()) {
    const bool by_job = direction == TaskDirection::rank_resume;
    const DocId& q = by_job ? job : resume;
    const DocId& c = by_job ? resume : job;
    auto [it, inserted] = task.relevant.try_emplace(q);
    if (inserted) task.queries.push_back(q);
    it->second.insert(c);
  }
  task.validate();
  return task;
}

double recall_at_k(const RankingResult& ranked, const std::set<DocId>& relevant, std::size_t k) {
  if (relevant.empty()) throw ValidationError("recall@k needs a nonempty relevant set");
  std::size_t hits = 0;
  const std::size_t n = std::min(k, ranked.ranked.size());
  for (std::size_t i = 0; i < n; ++i) hits += relevant.contains(ranked.ranked[i].id) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double ndcg_at_k(const RankingResult& ranked, const std::set<DocId>& relevant, std::size_t k) {
  if (relevant.empty()) throw ValidationError("ndcg@k needs a nonempty relevant set");
  double dcg = 0.0;
  const std::size_t n = std::min(k, ranked.ranked.size());
  for (std::size_t i = 0; i < n; ++i)
    if (relevant.contains(ranked.ranked[i].id)) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  double idcg = 0.0;
  const std::size_t ideal = std::min(relevant.size(), k);
  for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

MetricsReport evaluate(const EvalTask& task, const AdapterParams& adapter,
                       const EmbeddingStore& embeddings) {
  task.validate();
  for (const auto& id : task.candidate_pool)
    if (!embeddings.contains(id)) throw Error("missing embedding for " + id);
  MetricsReport report;
  report.task = std::string(to_string(task.direction));
  report.k = task.k;
  double sum_recall = 0.0;
  double sum_ndcg = 0.0;
  for (const auto& q : task.queries) {
    auto ranking = top_k(q, task.candidate_pool, task.candidate_pool.size(), embeddings, adapter);
    const auto& rel = task.relevant.at(q);
    QueryMetrics m{q, recall_at_k(ranking, rel, task.k), ndcg_at_k(ranking, rel, task.k)};
    sum_recall += m.recall;
    sum_ndcg += m.ndcg;
    report.per_query.push_back(m);
    report.rankings.push_back(std::move(ranking));
  }
  if (!task.queries.empty()) {
    report.macro_recall = sum_recall / static_cast<double>(task.queries.size());
    report.macro_ndcg = sum_ndcg / static_cast<double>(task.queries.size());
  }
  return report;
}

json report_to_json(const MetricsReport& report) {
  json per_query = json::array();
  for (const auto& q : report.per_query)
    per_query.push_back({{"query_id", q.query_id}, {"recall", q.recall}, {"ndcg", q.ndcg}});
  return json{{"task", report.task},
              {"K", report.k},
              {"adapter_provenance", report.adapter_provenance},
              {"macro", {{"recall", report.macro_recall}, {"ndcg", report.macro_ndcg}}},
              {"per_query", std::move(per_query)}};
}

void write_report(const MetricsReport& report, const std::filesystem::path& path) {
  write_json_file(path, report_to_json(report));
}

std::string format_metrics_table(const std::vector<MetricsReport>& reports) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %12s %12s\n", "Task", "Recall@K", "nDCG@K");
  out << line;
  for (const auto& r : reports) {
    const std::string task = r.task + "@" + std::to_string(r.k);
    std::snprintf(line, sizeof line, "%-14s %12.2f %12.2f\n", task.c_str(), 100.0 * r.macro_recall,
                  100.0 * r.macro_ndcg);
    out << line;
  }
  return out.str();
}

BiasReport bias_report(const std::vector<RankingResult>& rankings,
                       const std::map<DocId, std::string>& attributes, std::string attribute,
                       const std::vector<DocId>& corpus_ids, std::size_t top_n) {
  BiasReport report;
  report.attribute = std::move(attribute);
  report.top_n = top_n;
  for (const auto& [_, group] : attributes) report.topn_share.try_emplace(group, 0.0);
  for (const auto& ranking : rankings) {
    std::map<std::string, std::size_t> counts;
    std::size_t attributed = 0;
    const std::size_t n = std::min(top_n, ranking.ranked.size());
    for (std::size_t i = 0; i < n; ++i) {
      auto it = attributes.find(ranking.ranked[i].id);
      if (it == attributes.end()) continue;
      ++counts[it->second];
      ++attributed;
    }
    if (attributed == 0) {
      ++report.queries_skipped;
      continue;
    }
    ++report.queries_used;
    for (const auto& [group, c] : counts)
      report.topn_share[group] += static_cast<double>(c) / static_cast<double>(attributed);
  }
  for (auto& [_, share] : report.topn_share)
    share = report.queries_used == 0 ? 0.0 : share / static_cast<double>(report.queries_used);

  std::size_t attributed_corpus = 0;
  std::map<std::string, std::size_t> corpus_counts;
  for (const auto& id : corpus_ids) {
    auto it = attributes.find(id);
    if (it == attributes.end()) continue;
    ++corpus_counts[it->second];
    ++attributed_corpus;
  }
  for (const auto& [group, c] : corpus_counts)
    report.corpus_share[group] = static_cast<double>(c) / static_cast<double>(attributed_corpus);
  return report;
}

std::string format_bias_table(const std::vector<std::pair<std::string, BiasReport>>& rows) {
  std::set<std::string> groups;
  for (const auto& [_, r] : rows)
    for (const auto& [g, __] : r.topn_share) groups.insert(g);
  std::ostringstream out;
  char cell[96];
  std::snprintf(cell, sizeof cell, "%-24s", "Method");
  out << cell;
  for (const auto& g : groups) {
    std::snprintf(cell, sizeof cell, " %12s", (g + "(%)").c_str());
    out << cell;
  }
  out << '\n';
  for (const auto& [label, r] : rows) {
    std::snprintf(cell, sizeof cell, "%-24s", label.c_str());
    out << cell;
    for (const auto& g : groups) {
      auto it = r.topn_share.find(g);
      std::snprintf(cell, sizeof cell, " %12.2f", 100.0 * (it == r.topn_share.end() ? 0.0 : it->second));
      out << cell;
    }
    out << '\n';
  }
  return out.str();
}

json bias_to_json(const BiasReport& r) {
  return json{{"attribute", r.attribute},
              {"top_n", r.top_n},
              {"topn_share", r.topn_share},
              {"corpus_share", r.corpus_share},
              {"queries_used", r.queries_used},
              {"queries_skipped", r.queries_skipped}};
}

std::map<DocId, std::string> load_attributes(const std::filesystem::path& path,
                                             const std::string& attribute) {
  std::map<DocId, std::string> out;
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    if (j.at("attribute").get<std::string>() != attribute) return;
    out[j.at("doc_id").get<DocId>()] = j.at("value").get<std::string>();
  });
  return out;
}

}  // namespace fitrank
