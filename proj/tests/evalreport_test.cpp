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

#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "fitrank/evalreport.hpp"
#include "test_util.hpp"

namespace fitrank {
namespace {

RankingResult ranking(std::vector<DocId> ids) {
  RankingResult r;
  double s = static_cast<double>(ids.size());
  for (auto& id : ids) r.ranked.push_back({std::move(id), s--});
  return r;
}

// Second implementation: walks positions with explicit 1-based ranks.
double naive_ndcg(const std::vector<DocId>& order, const std::set<DocId>& rel, std::size_t k) {
  double dcg = 0;
  for (std::size_t rank = 1; rank <= order.size() && rank <= k; ++rank)
    if (rel.count(order[rank - 1])) dcg += std::log(2.0) / std::log(rank + 1.0);
  double idcg = 0;
  for (std::size_t rank = 1; rank <= std::min(k, rel.size()); ++rank)
    idcg += std::log(2.0) / std::log(rank + 1.0);
  return dcg / idcg;
}

double naive_recall(const std::vector<DocId>& order, const std::set<DocId>& rel, std::size_t k) {
  std::set<DocId> top(order.begin(), order.begin() + static_cast<long>(std::min(k, order.size())));
  double hit = 0;
  for (const auto& r : rel) hit += top.count(r);
  return hit / static_cast<double>(rel.size());
}

TEST(Recall, Examples) {
  const auto r = ranking({"a", "x", "y", "b"});
  EXPECT_DOUBLE_EQ(recall_at_k(r, {"a"}, 10), 1.0);
  EXPECT_DOUBLE_EQ(recall_at_k(r, {"a", "b"}, 2), 0.5);
  EXPECT_DOUBLE_EQ(recall_at_k(r, {"b"}, 2), 0.0);
  EXPECT_THROW(recall_at_k(r, {}, 2), ValidationError);
}

TEST(Ndcg, Examples) {
  EXPECT_DOUBLE_EQ(ndcg_at_k(ranking({"a", "x", "y"}), {"a"}, 10), 1.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(ranking({"x", "y", "a", "z"}), {"a"}, 3), 0.5);
  EXPECT_DOUBLE_EQ(ndcg_at_k(ranking({"x", "y", "a", "z"}), {"a"}, 2), 0.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(ranking({"a", "b", "c", "z"}), {"a", "b", "c"}, 3), 1.0);
  EXPECT_THROW(ndcg_at_k(ranking({"a"}), {}, 1), ValidationError);
}

TEST(Metrics, MatchNaiveOracleOnRandomRankings) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    auto ids = testing::numbered('c', n);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::set<DocId> rel;
    const std::size_t n_rel = 1 + rng() % n;
    while (rel.size() < n_rel) rel.insert(ids[rng() % n]);
    const std::size_t k = 1 + rng() % (n + 5);
    const auto r = ranking(ids);
    EXPECT_NEAR(ndcg_at_k(r, rel, k), naive_ndcg(ids, rel, k), 1e-12);
    EXPECT_NEAR(recall_at_k(r, rel, k), naive_recall(ids, rel, k), 1e-12);
  }
}

TEST(Metrics, RecallMonotoneAndCompleteAtPoolSize) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto ids = testing::numbered('c', 25);
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::set<DocId> rel{ids[rng() % 25], ids[rng() % 25], ids[rng() % 25]};
    const auto r = ranking(ids);
    double previous = 0;
    for (std::size_t k = 1; k <= 25; ++k) {
      const double rec = recall_at_k(r, rel, k);
      EXPECT_GE(rec, previous);
      previous = rec;
      const double nd = ndcg_at_k(r, rel, k);
      EXPECT_GE(nd, 0.0);
      EXPECT_LE(nd, 1.0 + 1e-12);
    }
    EXPECT_DOUBLE_EQ(previous, 1.0);
  }
}

struct Fixture {
  std::vector<DocId> queries = testing::numbered('q', 20);
  std::vector<DocId> pool = testing::numbered('c', 50);
  EmbeddingStore store;
  EvalTask task;

  Fixture() {
    auto all = queries;
    all.insert(all.end(), pool.begin(), pool.end());
    store = testing::random_store(all, 8, 5);
    std::mt19937_64 rng(6);
    task.direction = TaskDirection::rank_resume;
    task.queries = queries;
    task.candidate_pool = pool;
    task.k = 10;
    for (const auto& q : queries)
      for (int i = 0; i < 3; ++i) task.relevant[q].insert(pool[rng() % pool.size()]);
  }
};

TEST(Evaluate, MacroMatchesIndependentReimplementation) {
  Fixture f;
  const auto a = AdapterParams::identity(8);
  const auto report = evaluate(f.task, a, f.store);
  ASSERT_EQ(report.per_query.size(), 20u);
  double sum_ndcg = 0, sum_recall = 0;
  for (std::size_t i = 0; i < f.queries.size(); ++i) {
    const auto& q = f.queries[i];
    std::vector<std::pair<double, DocId>> scored;
    for (const auto& c : f.pool) scored.push_back({-f.store.vector(q).dot(f.store.vector(c)), c});
    std::sort(scored.begin(), scored.end());
    std::vector<DocId> order;
    for (const auto& [_, id] : scored) order.push_back(id);
    const double nd = naive_ndcg(order, f.task.relevant[q], 10);
    const double rc = naive_recall(order, f.task.relevant[q], 10);
    EXPECT_NEAR(report.per_query[i].ndcg, nd, 1e-12);
    EXPECT_NEAR(report.per_query[i].recall, rc, 1e-12);
    sum_ndcg += report.per_query[i].ndcg;
    sum_recall += report.per_query[i].recall;
  }
  EXPECT_NEAR(report.macro_ndcg, sum_ndcg / 20, 1e-12);
  EXPECT_NEAR(report.macro_recall, sum_recall / 20, 1e-12);
  EXPECT_EQ(report.rankings[0].ranked.size(), 50u);
}

TEST(Evaluate, PoolEqualToRelevantGivesFullRecall) {
  Fixture f;
  f.task.candidate_pool = {"c1", "c2"};
  for (auto& [q, rel] : f.task.relevant) rel = {"c1", "c2"};
  const auto report = evaluate(f.task, AdapterParams::identity(8), f.store);
  for (const auto& m : report.per_query) {
    EXPECT_DOUBLE_EQ(m.recall, 1.0);
    EXPECT_DOUBLE_EQ(m.ndcg, 1.0);
  }
}

TEST(Evaluate, MissingEmbeddingNamed) {
  Fixture f;
  f.task.candidate_pool.push_back("ghost");
  try {
    evaluate(f.task, AdapterParams::identity(8), f.store);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
}

TEST(EvalTask, ValidationAndConstruction) {
  EvalTask t;
  t.queries = {"q"};
  t.candidate_pool = {"a"};
  EXPECT_THROW(t.validate(), ValidationError);
  t.relevant["q"] = {"b"};
  EXPECT_THROW(t.validate(), ValidationError);
  t.relevant["q"] = {"a"};
  EXPECT_NO_THROW(t.validate());
  t.k = 0;
  EXPECT_THROW(t.validate(), ValidationError);

  LabelSet labels;
  labels.add({"r1", "j1", 1, Split::test});
  labels.add({"r2", "j1", 1, Split::test});
  labels.add({"r2", "j2", 0, Split::test});
  labels.add({"r1", "j2", 1, Split::test});
  const auto by_job = make_task(TaskDirection::rank_resume, labels, {"r1", "r2"}, 5);
  EXPECT_EQ(by_job.queries, (std::vector<DocId>{"j1", "j2"}));
  EXPECT_EQ(by_job.relevant.at("j1"), (std::set<DocId>{"r1", "r2"}));
  const auto by_resume = make_task(TaskDirection::rank_job, labels, {"j1", "j2"}, 5);
  EXPECT_EQ(by_resume.relevant.at("r1"), (std::set<DocId>{"j1", "j2"}));
}

TEST(Report, JsonLayoutAndTable) {
  Fixture f;
  auto report = evaluate(f.task, AdapterParams::identity(8), f.store);
  const auto j = report_to_json(report);
  EXPECT_EQ(j.at("task"), "rank_resume");
  EXPECT_EQ(j.at("K"), 10);
  EXPECT_DOUBLE_EQ(j.at("macro").at("ndcg").get<double>(), report.macro_ndcg);
  EXPECT_EQ(j.at("per_query").size(), 20u);
  report.macro_recall = 0.4;
  report.macro_ndcg = 0.12346;
  const auto table = format_metrics_table({report});
  EXPECT_NE(table.find("40.00"), std::string::npos) << table;
  EXPECT_NE(table.find("12.35"), std::string::npos) << table;
}

TEST(Bias, SharesAndSkips) {
  const std::map<DocId, std::string> attrs{{"a", "M"}, {"b", "M"}, {"c", "F"}};
  const auto all_m = bias_report({ranking({"a", "b"}), ranking({"b", "a"})}, attrs, "gender");
  EXPECT_DOUBLE_EQ(all_m.topn_share.at("M"), 1.0);
  EXPECT_DOUBLE_EQ(all_m.topn_share.at("F"), 0.0);

  const auto mixed = bias_report({ranking({"a"}), ranking({"c"}), ranking({"zz"})}, attrs, "gender",
                                 {"a", "b", "c", "zz"});
  EXPECT_DOUBLE_EQ(mixed.topn_share.at("M"), 0.5);
  EXPECT_EQ(mixed.queries_used, 2u);
  EXPECT_EQ(mixed.queries_skipped, 1u);
  EXPECT_NEAR(mixed.corpus_share.at("M"), 2.0 / 3.0, 1e-12);

  // Only the top 2 slots count.
  const auto top2 = bias_report({ranking({"c", "a", "b"})}, attrs, "gender", {}, 2);
  EXPECT_DOUBLE_EQ(top2.topn_share.at("F"), 0.5);
  double total = 0;
  for (const auto& [_, s] : top2.topn_share) total += s;
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Bias, TableFormatsPercentages) {
  BiasReport r;
  r.attribute = "gender";
  r.topn_share = {{"M", 0.7563}, {"F", 0.2437}};
  const auto table = format_bias_table({{"trained", r}});
  EXPECT_NE(table.find("M(%)"), std::string::npos);
  EXPECT_NE(table.find("75.63"), std::string::npos) << table;
  EXPECT_NE(table.find("24.37"), std::string::npos) << table;
}

TEST(Attributes, LoadFiltersOneAttribute) {
  const auto dir = testing::scratch_dir("attrs");
  {
    std::ofstream out(dir / "a.jsonl");
    out << R"({"doc_id":"r1","attribute":"gender","value":"F"})" << "\n"
        << R"({"doc_id":"r1","attribute":"age","value":"30"})" << "\n"
        << R"({"doc_id":"r2","attribute":"gender","value":"M"})" << "\n";
  }
  const auto m = load_attributes(dir / "a.jsonl", "gender");
  EXPECT_EQ(m, (std::map<DocId, std::string>{{"r1", "F"}, {"r2", "M"}}));
}

}  // namespace
}  // namespace fitrank
