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

#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fitrank/adapter.hpp"
#include "fitrank/common.hpp"
#include "fitrank/embedder.hpp"
#include "fitrank/evalreport.hpp"
#include "fitrank/miner.hpp"

namespace fitrank {

/// Index form of a batch. Columns of the embedding matrix X hold the
/// distinct documents; each pair lists the columns of its resume, its job,
/// and the negatives entering each direction's softmax.
struct ContrastiveProblem {
  std::vector<Index> resume;
  std::vector<Index> job;
  std::vector<std::vector<Index>> negative_jobs;     // resume-anchored softmax
  std::vector<std::vector<Index>> negative_resumes;  // job-anchored softmax
};

template <typename Scalar>
struct LossAndGradient {
  Scalar loss = Scalar(0);
  MatrixX<Scalar> gradient;  // dL/dW
};

namespace detail {

// log-sum-exp with max subtraction; writes softmax probabilities to `probs`.
template <typename Scalar>
Scalar log_sum_exp(const VectorX<Scalar>& logits, VectorX<Scalar>& probs) {
  const Scalar m = logits.maxCoeff();
  probs = (logits.array() - m).exp();
  const Scalar z = probs.sum();
  probs /= z;
  return m + std::log(z);
}

}  // namespace detail

/// Mean over pairs of L_R + L_J, where each direction is a softmax
/// cross-entropy over {positive} ∪ negatives with logits cos(g(a), g(b)) / T
/// and g(x) = W x / |W x|. The gradient is taken through the projection and
/// the normalization.
template <typename Scalar>
LossAndGradient<Scalar> contrastive_loss(const ContrastiveProblem& problem,
                                         const MatrixX<Scalar>& X, const MatrixX<Scalar>& W,
                                         Scalar temperature, bool with_gradient = true) {
  const std::size_t batch = problem.resume.size();
  if (batch == 0) throw ValidationError("empty batch");
  if (W.cols() != X.rows()) throw ValidationError("dimension mismatch between adapter and embeddings");

  const MatrixX<Scalar> U = W * X;
  const VectorX<Scalar> norms = U.colwise().norm().transpose();
  if ((norms.array() <= Scalar(0)).any()) throw ValidationError("adapter maps an embedding to zero");
  const MatrixX<Scalar> G = U * norms.cwiseInverse().asDiagonal();
  MatrixX<Scalar> dG = MatrixX<Scalar>::Zero(G.rows(), G.cols());

  const Scalar inv_t = Scalar(1) / temperature;
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(batch);
  Scalar total = Scalar(0);
  VectorX<Scalar> logits;
  VectorX<Scalar> probs;

  // One direction: anchor column a, positive column p, negative columns negs.
  auto direction = [&](Index a, Index p, const std::vector<Index>& negs) {
    logits.resize(static_cast<Index>(negs.size()) + 1);
    logits(0) = G.col(a).dot(G.col(p)) * inv_t;
    for (std::size_t k = 0; k < negs.size(); ++k)
      logits(static_cast<Index>(k) + 1) = G.col(a).dot(G.col(negs[k])) * inv_t;
    const Scalar lse = detail::log_sum_exp(logits, probs);
    total += lse - logits(0);
    if (!with_gradient) return;
    // dL/dlogit = softmax - onehot(0), scaled by the batch mean.
    probs(0) -= Scalar(1);
    probs *= inv_b * inv_t;
    dG.col(a) += probs(0) * G.col(p);
    dG.col(p) += probs(0) * G.col(a);
    for (std::size_t k = 0; k < negs.size(); ++k) {
      const Scalar w = probs(static_cast<Index>(k) + 1);
      dG.col(a) += w * G.col(negs[k]);
      dG.col(negs[k]) += w * G.col(a);
    }
  };

  for (std::size_t i = 0; i < batch; ++i) {
    if (problem.negative_jobs[i].empty() && problem.negative_resumes[i].empty())
      throw ValidationError("no negatives available");
    direction(problem.resume[i], problem.job[i], problem.negative_jobs[i]);
    direction(problem.job[i], problem.resume[i], problem.negative_resumes[i]);
  }

  LossAndGradient<Scalar> out;
  out.loss = total * inv_b;
  if (with_gradient) {
    // Through g = u/|u|: du = (I - g g^T) dg / |u|.
    const VectorX<Scalar> radial = (G.array() * dG.array()).colwise().sum().transpose();
    const MatrixX<Scalar> dU =
        (dG - G * radial.asDiagonal()) * norms.cwiseInverse().asDiagonal();
    out.gradient = dU * X.transpose();
  }
  return out;
}

/// Positive pairs plus, per pair, mined negatives for each direction.
struct TrainBatch {
  std::vector<std::pair<DocId, DocId>> pairs;            // (resume_id, job_id)
  std::vector<std::vector<DocId>> hard_negs_for_resume;  // job ids, per pair
  std::vector<std::vector<DocId>> hard_negs_for_job;     // resume ids, per pair
};

/// Resolves ids into a ContrastiveProblem. In-batch negatives are the
/// partners of the other pairs, excluding the pair's own positive partner;
/// duplicate negatives are dropped.
std::pair<ContrastiveProblem, std::vector<DocId>> build_problem(const TrainBatch& batch);

/// Loss and dL/dW for a batch of documents looked up in `embeddings`.
LossAndGradient<double> contrastive_loss(const TrainBatch& batch, const EmbeddingStore& embeddings,
                                         const AdapterParams& adapter);

struct TrainConfig {
  std::size_t batch_size = 4;
  std::size_t hard_negatives_per_pair = 2;
  double learning_rate = 1e-5;
  std::size_t epochs = 30;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool shuffle = true;
  double temperature = 0.05;

  void validate() const;
  json to_json() const;
  static TrainConfig from_json(const json& j);
};

/// Adam with bias correction.
class AdamOptimizer {
 public:
  AdamOptimizer(Index rows, Index cols, double lr, double beta1, double beta2, double epsilon);
  void step(Matrix& param, const Matrix& grad);

 private:
  double lr_, beta1_, beta2_, epsilon_;
  Matrix m_, v_;
  long t_ = 0;
};

struct TrainStep {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainResult {
  AdapterParams adapter;
  std::vector<TrainStep> log;
  std::vector<double> validation;  // per epoch, when a validator is set
  std::size_t best_epoch = 0;      // 1-based; 0 when no epoch ran
};

/// Mined negatives for both directions; either may be absent.
struct HardNegatives {
  const HardNegativeSet* for_resume = nullptr;  // anchors = resumes, negatives = jobs
  const HardNegativeSet* for_job = nullptr;     // anchors = jobs, negatives = resumes
};

/// Scores an adapter; higher is better. Used for early stopping.
using Validator = std::function<double(const AdapterParams&)>;

/// Adam over shuffled mini-batches of `positives`. With a validator, stops
/// after `patience` epochs without improvement and returns the best adapter;
/// otherwise returns the adapter after the last epoch. Deterministic given
/// config.seed. Trailing batches with no available negatives are skipped.
TrainResult train_adapter(std::span<const std::pair<DocId, DocId>> positives,
                          const EmbeddingStore& embeddings, const HardNegatives& negatives,
                          const TrainConfig& config, const Validator& validator = {},
                          const AdapterParams* init = nullptr);

void write_train_log(std::span<const TrainStep> log, const std::filesystem::path& path);

struct MinedNegatives {
  HardNegativeSet for_resume;
  HardNegativeSet for_job;
};

/// Produces negatives with the adapter of the previous iteration.
using MineFn = std::function<MinedNegatives(const AdapterParams& previous, int iteration)>;

/// RUM in both directions: anchors are the resumes / jobs of `positives`,
/// candidates are all jobs / resumes. Stream seed varies with the iteration.
MineFn make_rum_miner(const EmbeddingStore& embeddings, const LabelSet& labels,
                      std::vector<DocId> resume_ids, std::vector<DocId> job_ids,
                      PercentileRange range, std::size_t n_per_anchor, std::uint64_t seed);

struct IterationResult {
  int iteration = 0;
  AdapterParams adapter;
  MetricsReport metrics;
  std::optional<MinedNegatives> negatives;
  TrainResult training;
};

/// Iteration 1 trains without hard negatives. Each later iteration mines with
/// the previous adapter and retrains from identity (or from the previous
/// adapter when `continue_training`). Metrics come from `validation`.
std::vector<IterationResult> iterative_rum(std::span<const std::pair<DocId, DocId>> positives,
                                           const EmbeddingStore& embeddings,
                                           const TrainConfig& config, int iterations,
                                           const MineFn& mine, const EvalTask& validation,
                                           bool continue_training = false);

}  // namespace fitrank
