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

#include "fitrank/trainer.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include "fitrank/jsonl.hpp"

namespace fitrank {

namespace {

class ColumnIndex {
 public:
  Index add(const DocId& id) {
    auto [it, inserted] = index_.try_emplace(id, static_cast<Index>(ids_.size()));
    if (inserted) ids_.push_back(id);
    return it->second;
  }
  std::vector<DocId> take() { return std::move(ids_); }

 private:
  std::unordered_map<DocId, Index> index_;
  std::vector<DocId> ids_;
};

void push_unique(std::vector<Index>& v, Index c) {
  if (std::find(v.begin(), v.end(), c) == v.end()) v.push_back(c);
}

std::string batch_ids(const TrainBatch& batch) {
  std::ostringstream os;
  for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
    if (i) os << ", ";
    os << '(' << batch.pairs[i].first << ", " << batch.pairs[i].second << ')';
  }
  return os.str();
}

}  // namespace

std::pair<ContrastiveProblem, std::vector<DocId>> build_problem(const TrainBatch& batch) {
  const std::size_t b = batch.pairs.size();
  if (!batch.hard_negs_for_resume.empty() && batch.hard_negs_for_resume.size() != b)
    throw ValidationError("hard_negs_for_resume must have one entry per pair");
  if (!batch.hard_negs_for_job.empty() && batch.hard_negs_for_job.size() != b)
    throw ValidationError("hard_negs_for_job must have one entry per pair");

  ColumnIndex columns;
  ContrastiveProblem p;
  p.resume.resize(b);
  p.job.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    p.resume[i] = columns.add(batch.pairs[i].first);
    p.job[i] = columns.add(batch.pairs[i].second);
  }
  p.negative_jobs.assign(b, {});
  p.negative_resumes.assign(b, {});
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t k = 0; k < b; ++k) {
      if (k == i) continue;
      if (p.job[k] != p.job[i]) push_unique(p.negative_jobs[i], p.job[k]);
      if (p.resume[k] != p.resume[i]) push_unique(p.negative_resumes[i], p.resume[k]);
    }
    if (!batch.hard_negs_for_resume.empty())
      for (const auto& id : batch.hard_negs_for_resume[i]) {
        const Index c = columns.add(id);
        if (c == p.job[i] || c == p.resume[i])
          throw ValidationError("hard negative " + id + " coincides with its pair");
        push_unique(p.negative_jobs[i], c);
      }
    if (!batch.hard_negs_for_job.empty())
      for (const auto& id : batch.hard_negs_for_job[i]) {
        const Index c = columns.add(id);
        if (c == p.job[i] || c == p.resume[i])
          throw ValidationError("hard negative " + id + " coincides with its pair");
        push_unique(p.negative_resumes[i], c);
      }
  }
  return {std::move(p), columns.take()};
}

LossAndGradient<double> contrastive_loss(const TrainBatch& batch, const EmbeddingStore& embeddings,
                                         const AdapterParams& adapter) {
  auto [problem, ids] = build_problem(batch);
  const Matrix X = embeddings.stack(ids);
  return contrastive_loss<double>(problem, X, adapter.W, adapter.temperature);
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ValidationError("optimizer betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be positive");
}

json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},   {"hard_negatives_per_pair", hard_negatives_per_pair},
          {"learning_rate", learning_rate}, {"epochs", epochs},
          {"patience", patience},       {"seed", seed},
          {"beta1", beta1},             {"beta2", beta2},
          {"epsilon", epsilon},         {"shuffle", shuffle},
          {"temperature", temperature}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.hard_negatives_per_pair = j.value("hard_negatives_per_pair", c.hard_negatives_per_pair);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.shuffle = j.value("shuffle", c.shuffle);
  c.temperature = j.value("temperature", c.temperature);
  return c;
}

AdamOptimizer::AdamOptimizer(Index rows, Index cols, double lr, double beta1, double beta2,
                             double epsilon)
    : lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      epsilon_(epsilon),
      m_(Matrix::Zero(rows, cols)),
      v_(Matrix::Zero(rows, cols)) {}

void AdamOptimizer::step(Matrix& param, const Matrix& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  param.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + epsilon_);
}

namespace {

std::vector<DocId> take_negatives(const HardNegativeSet* set, const DocId& anchor, std::size_t l) {
  std::vector<DocId> out;
  if (!set || l == 0) return out;
  const auto it = set->negatives.find(anchor);
  if (it == set->negatives.end()) return out;
  for (std::size_t k = 0; k < it->second.size() && k < l; ++k) out.push_back(it->second[k].id);
  return out;
}

}  // namespace

TrainResult train_adapter(std::span<const std::pair<DocId, DocId>> positives,
                          const EmbeddingStore& embeddings, const HardNegatives& negatives,
                          const TrainConfig& config, const Validator& validator,
                          const AdapterParams* init) {
  config.validate();
  if (positives.empty()) throw ValidationError("no positive pairs to train on");
  if (negatives.for_resume &&
      negatives.for_resume->direction != MiningDirection::negatives_for_resume_anchor)
    throw ValidationError("resume-anchored negatives have the wrong direction");
  if (negatives.for_job && negatives.for_job->direction != MiningDirection::negatives_for_job_anchor)
    throw ValidationError("job-anchored negatives have the wrong direction");

  TrainResult result;
  AdapterParams adapter =
      init ? *init : AdapterParams::identity(embeddings.dim(), config.temperature, config.seed);
  adapter.temperature = config.temperature;
  adapter.seed = config.seed;
  adapter.validate();
  if (adapter.dim() != static_cast<Index>(embeddings.dim()))
    throw ValidationError("adapter dimension does not match embeddings");
  result.adapter = adapter;

  AdamOptimizer adam(adapter.dim(), adapter.dim(), config.learning_rate, config.beta1, config.beta2,
                     config.epsilon);
  std::mt19937_64 rng(derive_seed(config.seed, "train-shuffle"));
  std::vector<std::size_t> order(positives.size());

  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      TrainBatch batch;
      for (std::size_t k = start; k < end; ++k) {
        const auto& pair = positives[order[k]];
        batch.pairs.push_back(pair);
        batch.hard_negs_for_resume.push_back(
            take_negatives(negatives.for_resume, pair.first, config.hard_negatives_per_pair));
        batch.hard_negs_for_job.push_back(
            take_negatives(negatives.for_job, pair.second, config.hard_negatives_per_pair));
      }
      auto [problem, ids] = build_problem(batch);
      bool has_negatives = false;
      for (std::size_t i = 0; i < problem.resume.size(); ++i)
        has_negatives |= !problem.negative_jobs[i].empty() || !problem.negative_resumes[i].empty();
      if (!has_negatives) continue;  // a lone pair with nothing to contrast against
      const Matrix X = embeddings.stack(ids);
      LossAndGradient<double> lg;
      try {
        lg = contrastive_loss<double>(problem, X, adapter.W, adapter.temperature);
      } catch (const ValidationError& e) {
        throw ValidationError(std::string(e.what()) + " at step " + std::to_string(step + 1) +
                              ", batch " + batch_ids(batch));
      }
      ++step;
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite())
        throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                    std::to_string(step) + ", batch " + batch_ids(batch));
      result.log.push_back({epoch, step, lg.loss});
      adam.step(adapter.W, lg.gradient);
    }

    if (validator) {
      const double score = validator(adapter);
      result.validation.push_back(score);
      if (score > best) {
        best = score;
        since_best = 0;
        result.adapter = adapter;
        result.best_epoch = epoch;
      } else if (++since_best >= config.patience && config.patience > 0) {
        break;
      }
    } else {
      result.adapter = adapter;
      result.best_epoch = epoch;
    }
  }
  return result;
}

void write_train_log(std::span<const TrainStep> log, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (const auto& s : log)
    write_jsonl_line(out, json{{"epoch", s.epoch}, {"step", s.step}, {"loss", s.loss}});
}

MineFn make_rum_miner(const EmbeddingStore& embeddings, const LabelSet& labels,
                      std::vector<DocId> resume_ids, std::vector<DocId> job_ids,
                      PercentileRange range, std::size_t n_per_anchor, std::uint64_t seed) {
  range.validate();
  std::vector<DocId> resume_anchors;
  std::vector<DocId> job_anchors;
  {
    std::set<DocId> seen_r;
    std::set<DocId> seen_j;
    for (const auto& [r, j] : labels.positive_pairs()) {
      if (seen_r.insert(r).second) resume_anchors.push_back(r);
      if (seen_j.insert(j).second) job_anchors.push_back(j);
    }
  }
  return [&embeddings, &labels, resume_ids = std::move(resume_ids), job_ids = std::move(job_ids),
          resume_anchors = std::move(resume_anchors), job_anchors = std::move(job_anchors), range,
          n_per_anchor, seed](const AdapterParams& previous, int iteration) {
    const auto score_fn = embedding_score_fn(embeddings, previous);
    const std::uint64_t s = derive_seed(seed, "rum-iteration-" + std::to_string(iteration));
    MinedNegatives out;
    out.for_resume = rum_mine(resume_anchors, job_ids, score_fn, labels,
                              MiningDirection::negatives_for_resume_anchor, range, n_per_anchor, s);
    out.for_job = rum_mine(job_anchors, resume_ids, score_fn, labels,
                           MiningDirection::negatives_for_job_anchor, range, n_per_anchor, s);
    return out;
  };
}

std::vector<IterationResult> iterative_rum(std::span<const std::pair<DocId, DocId>> positives,
                                           const EmbeddingStore& embeddings,
                                           const TrainConfig& config, int iterations,
                                           const MineFn& mine, const EvalTask& validation,
                                           bool continue_training) {
  if (iterations < 1) throw ValidationError("iterations must be at least 1");
  validation.validate();
  const Validator validator = [&](const AdapterParams& a) {
    return evaluate(validation, a, embeddings).macro_ndcg;
  };

  std::vector<IterationResult> out;
  for (int t = 1; t <= iterations; ++t) {
    IterationResult it;
    it.iteration = t;
    HardNegatives negs;
    const AdapterParams* init = nullptr;
    if (t >= 2) {
      it.negatives = mine(out.back().adapter, t);
      negs.for_resume = &it.negatives->for_resume;
      negs.for_job = &it.negatives->for_job;
      if (continue_training) init = &out.back().adapter;
    }
    it.training = train_adapter(positives, embeddings, negs, config, validator, init);
    it.adapter = it.training.adapter;
    it.metrics = evaluate(validation, it.adapter, embeddings);
    it.metrics.adapter_provenance = {{"negatives_strategy", t == 1 ? "none" : "rum"},
                                     {"iteration", t}};
    out.push_back(std::move(it));
  }
  return out;
}

}  // namespace fitrank
