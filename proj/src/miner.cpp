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

#include "fitrank/miner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>
#include <unordered_map>

#include "fitrank/parallel.hpp"
#include "fitrank/scorer.hpp"

namespace fitrank {

void PercentileRange::validate() const {
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw ValidationError("percentile range not finite");
  if (!(lo >= 0.0 && lo < 100.0) || !(hi > 0.0 && hi <= 100.0))
    throw ValidationError("percentile bounds must satisfy 0 <= lo < 100 and 0 < hi <= 100");
  if (!(lo < hi)) throw ValidationError("percentile range empty");
}

std::pair<std::size_t, std::size_t> PercentileRange::rank_bounds(std::size_t m) const {
  const double md = static_cast<double>(m);
  return {static_cast<std::size_t>(std::floor(lo * md / 100.0)),
          static_cast<std::size_t>(std::floor(hi * md / 100.0))};
}

std::string_view to_string(MiningDirection d) {
  return d == MiningDirection::negatives_for_resume_anchor ? "negatives_for_resume_anchor"
                                                           : "negatives_for_job_anchor";
}

std::string_view to_string(MiningStrategy s) {
  switch (s) {
    case MiningStrategy::rum: return "rum";
    case MiningStrategy::bm25_topk: return "bm25_topk";
    case MiningStrategy::rejected: return "rejected";
    case MiningStrategy::random: return "random";
  }
  return "rum";
}

MiningDirection parse_mining_direction(std::string_view s) {
  if (s == "negatives_for_resume_anchor" || s == "resume") return MiningDirection::negatives_for_resume_anchor;
  if (s == "negatives_for_job_anchor" || s == "job") return MiningDirection::negatives_for_job_anchor;
  throw ValidationError("unknown mining direction " + std::string(s));
}

MiningStrategy parse_mining_strategy(std::string_view s) {
  if (s == "rum") return MiningStrategy::rum;
  if (s == "bm25_topk" || s == "bm25") return MiningStrategy::bm25_topk;
  if (s == "rejected") return MiningStrategy::rejected;
  if (s == "random") return MiningStrategy::random;
  throw ValidationError("unknown mining strategy " + std::string(s));
}

const std::vector<MinedNegative>& HardNegativeSet::of(const DocId& anchor) const {
  static const std::vector<MinedNegative> kEmpty;
  auto it = negatives.find(anchor);
  return it == negatives.end() ? kEmpty : it->second;
}

std::size_t HardNegativeSet::total() const {
  std::size_t n = 0;
  for (const auto& [_, list] : negatives) n += list.size();
  return n;
}

AnchorScoreFn embedding_score_fn(const EmbeddingStore& store, const AdapterParams& adapter) {
  std::vector<DocId> ids;
  ids.reserve(store.size());
  for (const auto& [id, _] : store) ids.push_back(id);
  auto index = std::make_shared<std::unordered_map<DocId, Index>>();
  for (std::size_t i = 0; i < ids.size(); ++i) (*index)[ids[i]] = static_cast<Index>(i);
  auto projected = std::make_shared<Matrix>(project_columns(adapter.W, store.stack(ids)));
  return [index, projected](const DocId& anchor, std::span<const DocId> candidates) {
    auto col = [&](const DocId& id) {
      auto it = index->find(id);
      if (it == index->end()) throw Error("missing embedding for " + id);
      return projected->col(it->second);
    };
    const Vector a = col(anchor);
    std::vector<double> out(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) out[i] = col(candidates[i]).dot(a);
    return out;
  };
}

bool is_labeled_positive(const LabelSet& labels, MiningDirection direction, const DocId& anchor,
                         const DocId& candidate) {
  return direction == MiningDirection::negatives_for_resume_anchor
             ? labels.is_positive(anchor, candidate)
             : labels.is_positive(candidate, anchor);
}

namespace {

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

// Non-positive candidates for one anchor, best first.
std::vector<ScoredCandidate> eligible_ranking(const DocId& anchor,
                                              std::span<const DocId> candidates,
                                              const AnchorScoreFn& score_fn,
                                              const LabelSet& labels, MiningDirection direction) {
  const auto scores = score_fn(anchor, candidates);
  if (scores.size() != candidates.size()) throw Error("score function returned wrong length");
  std::vector<ScoredCandidate> eligible;
  eligible.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] == anchor || is_labeled_positive(labels, direction, anchor, candidates[i]))
      continue;
    eligible.push_back({candidates[i], scores[i]});
  }
  std::sort(eligible.begin(), eligible.end(), ranks_before);
  return eligible;
}

std::vector<std::size_t> sample_positions(std::size_t first, std::size_t last, std::size_t n,
                                          std::uint64_t stream_seed) {
  std::vector<std::size_t> positions(last - first);
  std::iota(positions.begin(), positions.end(), first);
  std::vector<std::size_t> picked;
  std::mt19937_64 rng(stream_seed);
  std::sample(positions.begin(), positions.end(), std::back_inserter(picked), n, rng);
  return picked;
}

}  // namespace

HardNegativeSet rum_mine(std::span<const DocId> anchors, std::span<const DocId> candidates,
                         const AnchorScoreFn& score_fn, const LabelSet& labels,
                         MiningDirection direction, PercentileRange range,
                         std::size_t n_per_anchor, std::uint64_t seed) {
  range.validate();
  HardNegativeSet out{direction, MiningStrategy::rum, range, seed, {}, {}};
  std::vector<std::vector<MinedNegative>> mined(anchors.size());
  bounded_parallel_for(anchors.size(), worker_count(), [&](std::size_t a) {
    const DocId& anchor = anchors[a];
    const auto eligible = eligible_ranking(anchor, candidates, score_fn, labels, direction);
    const auto [first, last] = range.rank_bounds(eligible.size());
    if (last - first < n_per_anchor) {
      throw ValidationError("anchor " + anchor + ": rank band (" + std::to_string(first) + ", " +
                            std::to_string(last) + "] over M=" + std::to_string(eligible.size()) +
                            " eligible candidates holds fewer than " +
                            std::to_string(n_per_anchor) + " items");
    }
    // 1-based ranks (first, last] are 0-based positions [first, last).
    for (std::size_t pos : sample_positions(first, last, n_per_anchor, derive_seed(seed, anchor)))
      mined[a].push_back({eligible[pos].id, eligible[pos].score, pos + 1});
  });
  for (std::size_t a = 0; a < anchors.size(); ++a) out.negatives[anchors[a]] = std::move(mined[a]);
  return out;
}

HardNegativeSet rum_mine_global(std::span<const DocId> anchors, std::span<const DocId> candidates,
                                const AnchorScoreFn& score_fn, const LabelSet& labels,
                                MiningDirection direction, PercentileRange range,
                                std::size_t n_per_anchor, std::uint64_t seed) {
  range.validate();
  struct Pair {
    std::size_t anchor;
    ScoredCandidate cand;
  };
  std::vector<Pair> all;
  for (std::size_t a = 0; a < anchors.size(); ++a)
    for (auto& c : eligible_ranking(anchors[a], candidates, score_fn, labels, direction))
      all.push_back({a, std::move(c)});
  std::sort(all.begin(), all.end(), [&](const Pair& x, const Pair& y) {
    if (x.cand.score != y.cand.score) return x.cand.score > y.cand.score;
    if (anchors[x.anchor] != anchors[y.anchor]) return anchors[x.anchor] < anchors[y.anchor];
    return x.cand.id < y.cand.id;
  });
  const auto [first, last] = range.rank_bounds(all.size());
  std::vector<std::vector<std::size_t>> band(anchors.size());
  for (std::size_t pos = first; pos < last; ++pos) band[all[pos].anchor].push_back(pos);

  HardNegativeSet out{direction, MiningStrategy::rum, range, seed, {}, {}};
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    auto& list = out.negatives[anchors[a]];
    std::vector<std::size_t> picked;
    std::mt19937_64 rng(derive_seed(seed, anchors[a]));
    std::sample(band[a].begin(), band[a].end(), std::back_inserter(picked), n_per_anchor, rng);
    for (std::size_t pos : picked) list.push_back({all[pos].cand.id, all[pos].cand.score, pos + 1});
    if (list.size() < n_per_anchor) out.short_anchors.push_back(anchors[a]);
  }
  return out;
}

HardNegativeSet bm25_topk_mine(std::span<const DocId> anchors, std::span<const DocId> candidates,
                               const std::map<DocId, std::string>& texts, std::size_t k,
                               const LabelSet& labels, MiningDirection direction,
                               Bm25Params params) {
  auto text_of = [&](const DocId& id) -> const std::string& {
    auto it = texts.find(id);
    if (it == texts.end()) throw Error("no text for " + id);
    return it->second;
  };
  std::vector<std::string> docs;
  docs.reserve(candidates.size());
  for (const auto& c : candidates) docs.push_back(text_of(c));
  const Bm25Index index(docs, params);

  HardNegativeSet out{direction, MiningStrategy::bm25_topk, std::nullopt, 0, {}, {}};
  for (const auto& anchor : anchors) {
    const auto scores = index.score(text_of(anchor));
    std::vector<ScoredCandidate> eligible;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i] == anchor || is_labeled_positive(labels, direction, anchor, candidates[i]))
        continue;
      eligible.push_back({candidates[i], scores[i]});
    }
    std::sort(eligible.begin(), eligible.end(), ranks_before);
    auto& list = out.negatives[anchor];
    for (std::size_t i = 0; i < std::min(k, eligible.size()); ++i)
      list.push_back({eligible[i].id, eligible[i].score, i + 1});
    if (list.size() < k) out.short_anchors.push_back(anchor);
  }
  return out;
}

HardNegativeSet rejected_mine(std::span<const DocId> anchors, const LabelSet& labels,
                              MiningDirection direction) {
  HardNegativeSet out{direction, MiningStrategy::rejected, std::nullopt, 0, {}, {}};
  for (const auto& anchor : anchors) {
    const auto rejected = direction == MiningDirection::negatives_for_resume_anchor
                              ? labels.rejected_jobs(anchor)
                              : labels.rejected_resumes(anchor);
    auto& list = out.negatives[anchor];
    for (std::size_t i = 0; i < rejected.size(); ++i) list.push_back({rejected[i], 0.0, i + 1});
  }
  return out;
}

HardNegativeSet random_mine(std::span<const DocId> anchors, std::span<const DocId> candidates,
                            const LabelSet& labels, MiningDirection direction,
                            std::size_t n_per_anchor, std::uint64_t seed) {
  HardNegativeSet out{direction, MiningStrategy::random, std::nullopt, seed, {}, {}};
  for (const auto& anchor : anchors) {
    std::vector<DocId> eligible;
    for (const auto& c : candidates)
      if (c != anchor && !is_labeled_positive(labels, direction, anchor, c)) eligible.push_back(c);
    std::vector<DocId> picked;
    std::mt19937_64 rng(derive_seed(seed, anchor));
    std::sample(eligible.begin(), eligible.end(), std::back_inserter(picked), n_per_anchor, rng);
    auto& list = out.negatives[anchor];
    for (std::size_t i = 0; i < picked.size(); ++i) list.push_back({picked[i], 0.0, i + 1});
    if (list.size() < n_per_anchor) out.short_anchors.push_back(anchor);
  }
  return out;
}

double false_negative_rate(const HardNegativeSet& mined, const CompatibilityMatrix& ground_truth) {
  std::size_t total = 0;
  std::size_t positives = 0;
  const bool resume_anchor = mined.direction == MiningDirection::negatives_for_resume_anchor;
  for (const auto& [anchor, list] : mined.negatives) {
    for (const auto& neg : list) {
      ++total;
      const bool hit = resume_anchor ? ground_truth.compatible(anchor, neg.id)
                                     : ground_truth.compatible(neg.id, anchor);
      positives += hit ? 1 : 0;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(positives) / static_cast<double>(total);
}

void write_negatives(const HardNegativeSet& set, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (const auto& [anchor, list] : set.negatives) {
    json negs = json::array();
    for (const auto& n : list) negs.push_back({{"id", n.id}, {"score", n.score}, {"rank", n.rank}});
    json range = set.range ? json::array({set.range->lo, set.range->hi}) : json(nullptr);
    write_jsonl_line(out, json{{"anchor_id", anchor},
                               {"direction", to_string(set.direction)},
                               {"strategy", to_string(set.strategy)},
                               {"range", std::move(range)},
                               {"negatives", std::move(negs)},
                               {"seed", set.seed}});
  }
}

HardNegativeSet read_negatives(const std::filesystem::path& path) {
  HardNegativeSet set;
  bool first = true;
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    const auto direction = parse_mining_direction(j.at("direction").get<std::string>());
    const auto strategy = parse_mining_strategy(j.at("strategy").get<std::string>());
    std::optional<PercentileRange> range;
    if (!j.at("range").is_null()) {
      const auto& r = j.at("range");
      range = PercentileRange{r.at(0).get<double>(), r.at(1).get<double>()};
    }
    const auto seed = j.at("seed").get<std::uint64_t>();
    if (first) {
      set.direction = direction;
      set.strategy = strategy;
      set.range = range;
      set.seed = seed;
      first = false;
    } else if (direction != set.direction || strategy != set.strategy) {
      throw ValidationError("mixed direction or strategy in one negatives file");
    }
    auto& list = set.negatives[j.at("anchor_id").get<DocId>()];
    for (const auto& n : j.at("negatives"))
      list.push_back({n.at("id").get<DocId>(), n.at("score").get<double>(), n.at("rank").get<std::size_t>()});
  });
  return set;
}

}  // namespace fitrank
