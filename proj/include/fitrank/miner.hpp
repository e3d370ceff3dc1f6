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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fitrank/adapter.hpp"
#include "fitrank/bm25.hpp"
#include "fitrank/corpus.hpp"
#include "fitrank/embedder.hpp"
#include "fitrank/synthetic.hpp"

namespace fitrank {

/// Half-open band (lo, hi] of the descending ranking, in percent.
struct PercentileRange {
  double lo = 3.0;
  double hi = 4.0;

  void validate() const;

  /// 1-based eligible ranks (first, last] over M candidates:
  /// first = floor(lo * M / 100), last = floor(hi * M / 100).
  std::pair<std::size_t, std::size_t> rank_bounds(std::size_t m) const;

  bool operator==(const PercentileRange&) const = default;
};

enum class MiningDirection {
  negatives_for_resume_anchor,  // anchors are resumes, negatives are jobs
  negatives_for_job_anchor,     // anchors are jobs, negatives are resumes
};

enum class MiningStrategy { rum, bm25_topk, rejected, random };

std::string_view to_string(MiningDirection d);
std::string_view to_string(MiningStrategy s);
MiningDirection parse_mining_direction(std::string_view s);
MiningStrategy parse_mining_strategy(std::string_view s);

struct MinedNegative {
  DocId id;
  double score = 0.0;
  std::size_t rank = 0;  // 1-based among eligible candidates

  bool operator==(const MinedNegative&) const = default;
};

struct HardNegativeSet {
  MiningDirection direction = MiningDirection::negatives_for_job_anchor;
  MiningStrategy strategy = MiningStrategy::rum;
  std::optional<PercentileRange> range;
  std::uint64_t seed = 0;
  std::map<DocId, std::vector<MinedNegative>> negatives;
  /// Anchors that received fewer negatives than requested.
  std::vector<DocId> short_anchors;

  const std::vector<MinedNegative>& of(const DocId& anchor) const;
  std::size_t total() const;

  bool operator==(const HardNegativeSet&) const = default;
};

/// Scores every candidate for one anchor (higher = more compatible).
using AnchorScoreFn =
    std::function<std::vector<double>(const DocId& anchor, std::span<const DocId> candidates)>;

/// Cosine scoring through the adapter; anchors and candidates must be in `store`.
AnchorScoreFn embedding_score_fn(const EmbeddingStore& store, const AdapterParams& adapter);

/// True if (anchor, candidate) is a labeled positive under `direction`.
bool is_labeled_positive(const LabelSet& labels, MiningDirection direction, const DocId& anchor,
                         const DocId& candidate);

/// Runner-up mining. Per anchor: drop labeled positives (and the anchor
/// itself), rank the remaining M candidates by descending score (ties by
/// id), and sample `n_per_anchor` without replacement from the ranks in
/// range.rank_bounds(M). The per-anchor stream is derived from (seed, anchor).
/// Throws ValidationError when an anchor's band holds fewer than n items.
HardNegativeSet rum_mine(std::span<const DocId> anchors, std::span<const DocId> candidates,
                         const AnchorScoreFn& score_fn, const LabelSet& labels,
                         MiningDirection direction, PercentileRange range,
                         std::size_t n_per_anchor, std::uint64_t seed);

/// Experimental: one percentile band over all (anchor, candidate) pairs
/// ranked jointly; up to n per anchor sampled from the pairs inside it.
HardNegativeSet rum_mine_global(std::span<const DocId> anchors, std::span<const DocId> candidates,
                                const AnchorScoreFn& score_fn, const LabelSet& labels,
                                MiningDirection direction, PercentileRange range,
                                std::size_t n_per_anchor, std::uint64_t seed);

/// The k best BM25 candidates per anchor, skipping labeled positives. Anchors
/// left short are listed in short_anchors.
HardNegativeSet bm25_topk_mine(std::span<const DocId> anchors, std::span<const DocId> candidates,
                               const std::map<DocId, std::string>& texts, std::size_t k,
                               const LabelSet& labels, MiningDirection direction,
                               Bm25Params params = {});

/// All label-0 partners of each anchor.
HardNegativeSet rejected_mine(std::span<const DocId> anchors, const LabelSet& labels,
                              MiningDirection direction);

/// n uniform non-positive candidates per anchor.
HardNegativeSet random_mine(std::span<const DocId> anchors, std::span<const DocId> candidates,
                            const LabelSet& labels, MiningDirection direction,
                            std::size_t n_per_anchor, std::uint64_t seed);

/// Fraction of mined negatives that are compatible in the ground truth.
double false_negative_rate(const HardNegativeSet& mined, const CompatibilityMatrix& ground_truth);

void write_negatives(const HardNegativeSet& set, const std::filesystem::path& path);
HardNegativeSet read_negatives(const std::filesystem::path& path);

}  // namespace fitrank
