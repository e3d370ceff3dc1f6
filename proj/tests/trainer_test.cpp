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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "fitrank/synthetic.hpp"
#include "fitrank/trainer.hpp"
#include "test_util.hpp"

namespace fitrank {
namespace {


// Random problem over `docs` columns: pairs use disjoint columns, negatives
// are drawn from the remaining ones.
ContrastiveProblem random_problem(Index docs, std::size_t pairs, std::size_t negs,
                                  std::mt19937_64& rng) {
  ContrastiveProblem p;
  std::vector<Index> cols(static_cast<std::size_t>(docs));
  std::iota(cols.begin(), cols.end(), Index{0});
  std::shuffle(cols.begin(), cols.end(), rng);
  for (std::size_t i = 0; i < pairs; ++i) {
    const Index r = cols[2 * i];
    const Index j = cols[2 * i + 1];
    p.resume.push_back(r);
    p.job.push_back(j);
    std::vector<Index> pool;
    for (Index c = 0; c < docs; ++c)
      if (c != r && c != j) pool.push_back(c);
    std::shuffle(pool.begin(), pool.end(), rng);
    p.negative_jobs.emplace_back(pool.begin(), pool.begin() + static_cast<long>(negs));
    std::shuffle(pool.begin(), pool.end(), rng);
    p.negative_resumes.emplace_back(pool.begin(), pool.begin() + static_cast<long>(negs));
  }
  return p;
}

Matrix random_columns(Index dim, Index n, std::mt19937_64& rng) {
  Matrix x(dim, n);
  for (Index c = 0; c < n; ++c) x.col(c) = testing::random_unit(dim, rng);
  return x;
}

Matrix perturbed_identity(Index dim, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix w = Matrix::Identity(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) w(i, j) += scale * g(rng);
  return w;
}

// Direct loss: per pair, per direction, ln(1 + sum exp(s_neg - s_pos)).
double reference_loss(const ContrastiveProblem& p, const Matrix& X, const Matrix& W, double t) {
  const auto g = [&](Index c) { return Vector((W * X.col(c)).normalized()); };
  const auto s = [&](Index a, Index b) { return g(a).dot(g(b)) / t; };
  double total = 0;
  for (std::size_t i = 0; i < p.resume.size(); ++i) {
    double sum = 0;
    for (Index n : p.negative_jobs[i]) sum += std::exp(s(p.resume[i], n) - s(p.resume[i], p.job[i]));
    total += std::log1p(sum);
    sum = 0;
    for (Index n : p.negative_resumes[i]) sum += std::exp(s(p.job[i], n) - s(p.job[i], p.resume[i]));
    total += std::log1p(sum);
  }
  return total / static_cast<double>(p.resume.size());
}

TEST(ContrastiveLoss, UniformLogitsGiveTwoLogOnePlusL) {
  for (std::size_t l : {1u, 2u, 5u, 31u}) {
    // Every document is the same vector, so all logits are equal.
    const Index docs = static_cast<Index>(2 + l);
    const Matrix X = Vector::Unit(4, 1).replicate(1, docs);
    ContrastiveProblem p;
    p.resume = {0};
    p.job = {1};
    std::vector<Index> negs;
    for (Index c = 2; c < docs; ++c) negs.push_back(c);
    p.negative_jobs = {negs};
    p.negative_resumes = {negs};
    const auto lg = contrastive_loss<double>(p, X, Matrix::Identity(4, 4), 0.05);
    EXPECT_NEAR(lg.loss, 2 * std::log(1.0 + static_cast<double>(l)), 1e-9) << "l=" << l;
  }
}

TEST(ContrastiveLoss, SinglePairTwoNegatives) {
  ContrastiveProblem p{{0}, {1}, {{2, 3}}, {{2, 3}}};
  const Matrix X = Vector::Unit(3, 0).replicate(1, 4);
  EXPECT_NEAR(contrastive_loss<double>(p, X, Matrix::Identity(3, 3), 0.05).loss, 2.19722, 1e-5);
}

TEST(ContrastiveLoss, NoNegativesIsAnError) {
  ContrastiveProblem p{{0}, {1}, {{}}, {{}}};
  const Matrix X = Matrix::Identity(2, 2);
  try {
    contrastive_loss<double>(p, X, Matrix::Identity(2, 2), 0.05);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "no negatives available");
  }
  TrainBatch b;
  b.pairs = {{"r0", "j0"}};
  b.hard_negs_for_resume = {{}};
  b.hard_negs_for_job = {{}};
  const auto store = testing::random_store({"r0", "j0"}, 4, 1);
  EXPECT_THROW(contrastive_loss(b, store, AdapterParams::identity(4)), ValidationError);
}

TEST(ContrastiveLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  const double h = 1e-5;
  for (Index dim : {4, 8, 16}) {
    for (double t : {0.01, 0.05}) {
      for (int trial = 0; trial < 20; ++trial) {
        const Index docs = 12;
        const auto p = random_problem(docs, 3, 1 + trial % 4, rng);
        const Matrix X = random_columns(dim, docs, rng);
        const Matrix W = perturbed_identity(dim, 0.3, rng);
        const Matrix analytic = contrastive_loss<double>(p, X, W, t).gradient;
        Matrix numeric(dim, dim);
        for (Index i = 0; i < dim; ++i)
          for (Index j = 0; j < dim; ++j) {
            Matrix wp = W, wm = W;
            wp(i, j) += h;
            wm(i, j) -= h;
            numeric(i, j) = (contrastive_loss<double>(p, X, wp, t, false).loss -
                             contrastive_loss<double>(p, X, wm, t, false).loss) /
                            (2 * h);
          }
        const double rel = (analytic - numeric).norm() / std::max(analytic.norm(), numeric.norm());
        EXPECT_LT(rel, 1e-4) << "dim=" << dim << " T=" << t << " trial=" << trial;
      }
    }
  }
}

TEST(ContrastiveLoss, MatchesDirectFormula) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = random_problem(10, 4, 2, rng);
    const Matrix X = random_columns(6, 10, rng);
    const Matrix W = perturbed_identity(6, 0.5, rng);
    const double t = trial % 2 ? 0.05 : 0.2;
    EXPECT_NEAR(contrastive_loss<double>(p, X, W, t).loss, reference_loss(p, X, W, t), 1e-10);
  }
}

TEST(ContrastiveLoss, SaturatesTowardZero) {
  // Positives identical, negatives orthogonal: loss ~ 2 l exp(-1/T).
  Matrix X(3, 4);
  X << 1, 1, 0, 0,  //
      0, 0, 1, 0,   //
      0, 0, 0, 1;
  ContrastiveProblem p{{0}, {1}, {{2, 3}}, {{2, 3}}};
  double previous = std::numeric_limits<double>::infinity();
  for (double t : {1.0, 0.5, 0.1, 0.05, 0.01}) {
    const double loss = contrastive_loss<double>(p, X, Matrix::Identity(3, 3), t).loss;
    EXPECT_LT(loss, previous);
    EXPECT_NEAR(loss, 2 * std::log1p(2 * std::exp(-1 / t)), 1e-12);
    previous = loss;
  }
  EXPECT_LT(previous, 1e-40);
}

TEST(ContrastiveLoss, IncreasesWithNegativeSimilarity) {
  // Negative at angle theta from the anchor; the positive matches exactly.
  double previous = -1;
  for (double theta = 3.0; theta >= 0.0; theta -= 0.25) {
    Matrix X(2, 3);
    X.col(0) << 1, 0;
    X.col(1) << 1, 0;
    X.col(2) << std::cos(theta), std::sin(theta);
    ContrastiveProblem p{{0}, {1}, {{2}}, {{2}}};
    // T = 0.5 keeps the far end of the sweep away from double underflow.
    const double loss = contrastive_loss<double>(p, X, Matrix::Identity(2, 2), 0.5).loss;
    EXPECT_GT(loss, previous);
    previous = loss;
  }
}

TEST(ContrastiveLoss, InvariantToPairAndNegativeOrder) {
  std::mt19937_64 rng(8);
  const auto p = random_problem(14, 5, 3, rng);
  const Matrix X = random_columns(5, 14, rng);
  const Matrix W = perturbed_identity(5, 0.4, rng);
  const auto base = contrastive_loss<double>(p, X, W, 0.05);
  auto q = p;
  std::vector<std::size_t> perm{3, 0, 4, 2, 1};
  for (std::size_t i = 0; i < perm.size(); ++i) {
    q.resume[i] = p.resume[perm[i]];
    q.job[i] = p.job[perm[i]];
    q.negative_jobs[i] = p.negative_jobs[perm[i]];
    q.negative_resumes[i] = p.negative_resumes[perm[i]];
    std::reverse(q.negative_jobs[i].begin(), q.negative_jobs[i].end());
  }
  const auto permuted = contrastive_loss<double>(q, X, W, 0.05);
  EXPECT_NEAR(base.loss, permuted.loss, 1e-12);
  EXPECT_TRUE(base.gradient.isApprox(permuted.gradient, 1e-10));
}

TEST(ContrastiveLoss, LargeLogitsStayFinite) {
  // T = 0.01 puts logits in [-100, 100].
  Matrix X(2, 4);
  X << 1, -1, 1, 1,  //
      0, 0, 0, 0;
  ContrastiveProblem p{{0}, {1}, {{2, 3}}, {{2, 3}}};
  const auto lg = contrastive_loss<double>(p, X, Matrix::Identity(2, 2), 0.01);
  EXPECT_TRUE(std::isfinite(lg.loss));
  EXPECT_TRUE(lg.gradient.allFinite());
  // Resume side: s_neg - s_pos = 200 in both slots. Job side: all logits equal.
  EXPECT_NEAR(lg.loss, 200 + std::log(2.0) + std::log(3.0), 1e-9);
}

TEST(BuildProblem, InBatchNegativesExcludeOwnPartner) {
  TrainBatch b;
  b.pairs = {{"r0", "j0"}, {"r1", "j0"}, {"r2", "j1"}};
  b.hard_negs_for_resume = {{"j5"}, {}, {"j5"}};
  b.hard_negs_for_job = {{}, {"r9"}, {}};
  const auto [p, ids] = build_problem(b);
  const auto names = [&](const std::vector<Index>& cols) {
    std::vector<DocId> out;
    for (Index c : cols) out.push_back(ids[static_cast<std::size_t>(c)]);
    std::sort(out.begin(), out.end());
    return out;
  };
  EXPECT_EQ(names(p.negative_jobs[0]), (std::vector<DocId>{"j1", "j5"}));
  EXPECT_EQ(names(p.negative_jobs[1]), (std::vector<DocId>{"j1"}));
  EXPECT_EQ(names(p.negative_jobs[2]), (std::vector<DocId>{"j0", "j5"}));
  EXPECT_EQ(names(p.negative_resumes[0]), (std::vector<DocId>{"r1", "r2"}));
  EXPECT_EQ(names(p.negative_resumes[1]), (std::vector<DocId>{"r0", "r2", "r9"}));

  b.hard_negs_for_resume[0] = {"j0"};
  EXPECT_THROW(build_problem(b), ValidationError);
}

TEST(Adam, MatchesHandComputedSteps) {
  AdamOptimizer adam(1, 2, 0.1, 0.9, 0.999, 1e-8);
  Matrix w = Matrix::Zero(1, 2);
  Matrix g(1, 2);
  g << 2.0, -0.5;
  adam.step(w, g);
  // Step 1: bias-corrected moments equal g and g^2.
  EXPECT_NEAR(w(0, 0), -0.1 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_NEAR(w(0, 1), 0.1 * 0.5 / (0.5 + 1e-8), 1e-15);
  Matrix g2(1, 2);
  g2 << 1.0, 1.0;
  adam.step(w, g2);
  const double m = (0.9 * 0.1 * 2.0 + 0.1 * 1.0) / (1 - 0.81);
  const double v = (0.999 * 0.001 * 4.0 + 0.001 * 1.0) / (1 - 0.999 * 0.999);
  EXPECT_NEAR(w(0, 0), -0.1 * 2.0 / (2.0 + 1e-8) - 0.1 * m / (std::sqrt(v) + 1e-8), 1e-12);
}

struct Toy {
  SyntheticCorpus synth;
  std::vector<std::pair<DocId, DocId>> train;
  EvalTask valid;
  EvalTask test;
};

Toy make_toy(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.n_resumes = 300;
  spec.n_jobs = 100;
  spec.latent_dim = 6;
  spec.label_density = 0.05;
  spec.seed = seed;
  spec.accept_threshold = latent_cosine_quantile(spec, 0.95);
  Toy t;
  t.synth = generate_synthetic(spec);
  t.train = t.synth.corpus.labels.filter(Split::train).positive_pairs();
  t.valid = ground_truth_task(t.synth, TaskDirection::rank_resume, Split::valid, 10);
  t.test = ground_truth_task(t.synth, TaskDirection::rank_resume, Split::test, 10);
  return t;
}

TrainConfig fast_config() {
  TrainConfig c;
  c.learning_rate = 1e-2;
  c.epochs = 15;
  c.patience = 3;
  c.seed = 3;
  return c;
}

TEST(TrainAdapter, ZeroEpochsReturnsIdentity) {
  const auto toy = make_toy(1);
  auto c = fast_config();
  c.epochs = 0;
  const auto r = train_adapter(toy.train, toy.synth.embeddings, {}, c);
  EXPECT_EQ(r.adapter.W, Matrix::Identity(r.adapter.dim(), r.adapter.dim()));
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(r.best_epoch, 0u);
}

TEST(TrainAdapter, DeterministicForSeed) {
  const auto toy = make_toy(2);
  auto c = fast_config();
  c.epochs = 3;
  const auto a = train_adapter(toy.train, toy.synth.embeddings, {}, c);
  const auto b = train_adapter(toy.train, toy.synth.embeddings, {}, c);
  EXPECT_EQ(a.adapter.W, b.adapter.W);  // bitwise
  ASSERT_EQ(a.log.size(), b.log.size());
  c.seed = 4;
  const auto d = train_adapter(toy.train, toy.synth.embeddings, {}, c);
  EXPECT_NE(a.adapter.W, d.adapter.W);
}

TEST(TrainAdapter, BeatsIdentityOnSyntheticData) {
  const auto toy = make_toy(3);
  const auto& store = toy.synth.embeddings;
  const Validator v = [&](const AdapterParams& a) { return evaluate(toy.valid, a, store).macro_ndcg; };
  const auto r = train_adapter(toy.train, store, {}, fast_config(), v);
  const double base = evaluate(toy.test, AdapterParams::identity(store.dim()), store).macro_ndcg;
  const double trained = evaluate(toy.test, r.adapter, store).macro_ndcg;
  EXPECT_GT(trained, base);
  EXPECT_GE(r.best_epoch, 1u);
  EXPECT_EQ(*std::max_element(r.validation.begin(), r.validation.end()),
            r.validation[r.best_epoch - 1]);
  EXPECT_DOUBLE_EQ(v(r.adapter), r.validation[r.best_epoch - 1]);
}

TEST(TrainAdapter, EarlyStopsAfterPatience) {
  const auto toy = make_toy(4);
  auto c = fast_config();
  c.epochs = 50;
  c.patience = 2;
  int calls = 0;
  const Validator constant = [&](const AdapterParams&) { return ++calls == 1 ? 1.0 : 0.0; };
  const auto r = train_adapter(toy.train, toy.synth.embeddings, {}, c, constant);
  EXPECT_EQ(r.validation.size(), 3u);
  EXPECT_EQ(r.best_epoch, 1u);
}

TEST(TrainAdapter, NonFiniteLossNamesStep) {
  const auto toy = make_toy(5);
  auto c = fast_config();
  c.learning_rate = 1e308;
  try {
    train_adapter(toy.train, toy.synth.embeddings, {}, c);
    FAIL();
  } catch (const ValidationError& e) {
    FAIL() << e.what();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("non-finite loss at epoch 1, step"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}

TEST(TrainAdapter, RejectsWrongNegativeDirection) {
  const auto toy = make_toy(6);
  HardNegativeSet wrong;
  wrong.direction = MiningDirection::negatives_for_job_anchor;
  EXPECT_THROW(train_adapter(toy.train, toy.synth.embeddings, {&wrong, nullptr}, fast_config()),
               ValidationError);
}

TEST(IterativeRum, MinesOncePerLaterIteration) {
  const auto toy = make_toy(7);
  const auto labels = toy.synth.corpus.labels.filter(Split::train);
  const auto inner = make_rum_miner(toy.synth.embeddings, labels, toy.synth.ground_truth.resume_ids(),
                                    toy.synth.ground_truth.job_ids(), {3, 6}, 2, 9);
  std::vector<int> seen;
  const MineFn counting = [&](const AdapterParams& a, int t) {
    seen.push_back(t);
    return inner(a, t);
  };
  auto c = fast_config();
  c.epochs = 2;
  const auto one = iterative_rum(toy.train, toy.synth.embeddings, c, 1, counting, toy.valid);
  EXPECT_TRUE(seen.empty());
  ASSERT_EQ(one.size(), 1u);
  EXPECT_FALSE(one[0].negatives.has_value());

  const auto three = iterative_rum(toy.train, toy.synth.embeddings, c, 3, counting, toy.valid);
  EXPECT_EQ(seen, (std::vector<int>{2, 3}));
  ASSERT_EQ(three.size(), 3u);
  EXPECT_TRUE(three[2].negatives.has_value());
  EXPECT_EQ(three[1].metrics.adapter_provenance["negatives_strategy"], "rum");
  EXPECT_EQ(three[0].metrics.adapter_provenance["negatives_strategy"], "none");
  // Iteration 1 is the same computation with or without later iterations.
  EXPECT_EQ(one[0].adapter.W, three[0].adapter.W);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c = fast_config();
  c.hard_negatives_per_pair = 5;
  const auto back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  c.temperature = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = fast_config();
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

}  // namespace
}  // namespace fitrank
