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

#include "fitrank/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fitrank {

namespace {

constexpr int kVocabularyBins = 32;

struct Latents {
  Matrix resumes;  // latent_dim x n_resumes
  Matrix jobs;
};

Latents draw_latents(const SyntheticSpec& spec) {
  std::mt19937_64 rng(derive_seed(spec.seed, "latent"));
  std::normal_distribution<double> gauss;
  Latents l{Matrix(spec.latent_dim, spec.n_resumes), Matrix(spec.latent_dim, spec.n_jobs)};
  for (Index c = 0; c < l.resumes.cols(); ++c)
    for (Index r = 0; r < l.resumes.rows(); ++r) l.resumes(r, c) = gauss(rng);
  for (Index c = 0; c < l.jobs.cols(); ++c)
    for (Index r = 0; r < l.jobs.rows(); ++r) l.jobs(r, c) = gauss(rng);
  return l;
}

Matrix latent_cosines(const Latents& l) {
  return l.resumes.colwise().normalized().transpose() * l.jobs.colwise().normalized();
}

int quantize(double x) {
  const double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
  return std::clamp(static_cast<int>(cdf * kVocabularyBins), 0, kVocabularyBins - 1);
}

std::string latent_tokens(const Eigen::Ref<const Vector>& z) {
  std::string out;
  for (Index k = 0; k < z.size(); ++k) {
    const int bin = quantize(z(k));
    if (!out.empty()) out += ' ';
    out += "d" + std::to_string(k) + "q" + std::to_string(bin) + " d" + std::to_string(k) + "c" +
           std::to_string(bin / 4);
  }
  return out;
}

std::string padded(char prefix, std::size_t i, std::size_t n) {
  const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
  std::string digits = std::to_string(i);
  return std::string(1, prefix) + std::string(width - digits.size(), '0') + digits;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_resumes == 0 || n_jobs == 0) throw ValidationError("synthetic corpus needs resumes and jobs");
  if (latent_dim == 0) throw ValidationError("latent_dim must be >= 1");
  if (!(label_density > 0.0 && label_density <= 1.0))
    throw ValidationError("label_density must be in (0, 1]");
  if (label_density * static_cast<double>(n_resumes) * static_cast<double>(n_jobs) < 1.0)
    throw ValidationError("label_density * n_resumes * n_jobs must be >= 1");
  if (!std::isfinite(accept_threshold)) throw ValidationError("accept_threshold must be finite");
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
  if (embedding_dim < latent_dim + 1)
    throw ValidationError("embedding_dim must exceed latent_dim");
  if (!(nuisance_scale >= 0.0) || !std::isfinite(kind_offset))
    throw ValidationError("invalid embedding shape parameters");
  if (!(train_fraction >= 0.0 && valid_fraction >= 0.0 && train_fraction + valid_fraction <= 1.0))
    throw ValidationError("split fractions must be non-negative and sum to <= 1");
}

json SyntheticSpec::to_json() const {
  return json{{"n_resumes", n_resumes},         {"n_jobs", n_jobs},
              {"latent_dim", latent_dim},       {"label_density", label_density},
              {"accept_threshold", accept_threshold}, {"noise_sigma", noise_sigma},
              {"seed", seed},                   {"embedding_dim", embedding_dim},
              {"nuisance_scale", nuisance_scale}, {"kind_offset", kind_offset},
              {"train_fraction", train_fraction}, {"valid_fraction", valid_fraction}};
}

SyntheticSpec SyntheticSpec::from_json(const json& j) {
  SyntheticSpec s;
  s.n_resumes = j.value("n_resumes", s.n_resumes);
  s.n_jobs = j.value("n_jobs", s.n_jobs);
  s.latent_dim = j.value("latent_dim", s.latent_dim);
  s.label_density = j.value("label_density", s.label_density);
  s.accept_threshold = j.value("accept_threshold", s.accept_threshold);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
  s.seed = j.value("seed", s.seed);
  s.embedding_dim = j.value("embedding_dim", s.embedding_dim);
  s.nuisance_scale = j.value("nuisance_scale", s.nuisance_scale);
  s.kind_offset = j.value("kind_offset", s.kind_offset);
  s.train_fraction = j.value("train_fraction", s.train_fraction);
  s.valid_fraction = j.value("valid_fraction", s.valid_fraction);
  return s;
}

CompatibilityMatrix::CompatibilityMatrix(std::vector<DocId> resume_ids, std::vector<DocId> job_ids)
    : resume_ids_(std::move(resume_ids)), job_ids_(std::move(job_ids)) {
  for (std::size_t i = 0; i < resume_ids_.size(); ++i) resume_index_[resume_ids_[i]] = i;
  for (std::size_t i = 0; i < job_ids_.size(); ++i) job_index_[job_ids_[i]] = i;
  values_.setZero(static_cast<Index>(resume_ids_.size()), static_cast<Index>(job_ids_.size()));
}

bool CompatibilityMatrix::compatible(const DocId& resume_id, const DocId& job_id) const {
  auto r = resume_index_.find(resume_id);
  if (r == resume_index_.end()) throw Error("resume " + resume_id + " not in ground truth");
  auto j = job_index_.find(job_id);
  if (j == job_index_.end()) throw Error("job " + job_id + " not in ground truth");
  return at(r->second, j->second);
}

std::size_t CompatibilityMatrix::positives() const {
  return static_cast<std::size_t>(values_.cast<long>().sum());
}

void CompatibilityMatrix::save(const std::filesystem::path& path) const {
  auto out = open_for_write(path);
  write_jsonl_line(out, json{{"resume_ids", resume_ids_}, {"job_ids", job_ids_}});
  for (Index r = 0; r < values_.rows(); ++r)
    for (Index j = 0; j < values_.cols(); ++j)
      if (values_(r, j) != 0)
        write_jsonl_line(out, json{{"resume_id", resume_ids_[r]}, {"job_id", job_ids_[j]}});
}

CompatibilityMatrix CompatibilityMatrix::load(const std::filesystem::path& path) {
  CompatibilityMatrix m;
  bool have_header = false;
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    if (!have_header) {
      m = CompatibilityMatrix(j.at("resume_ids").get<std::vector<DocId>>(),
                              j.at("job_ids").get<std::vector<DocId>>());
      have_header = true;
      return;
    }
    const auto r = m.resume_index_.find(j.at("resume_id").get<DocId>());
    const auto c = m.job_index_.find(j.at("job_id").get<DocId>());
    if (r == m.resume_index_.end() || c == m.job_index_.end())
      throw ValidationError("ground-truth pair references unknown id");
    m.set(r->second, c->second, true);
  });
  return m;
}

double latent_cosine_quantile(const SyntheticSpec& spec, double q) {
  spec.validate();
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile must be in [0, 1]");
  const Matrix cos = latent_cosines(draw_latents(spec));
  std::vector<double> values(cos.data(), cos.data() + cos.size());
  std::sort(values.begin(), values.end());
  // Linear interpolation between order statistics.
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Latents latents = draw_latents(spec);
  const Matrix cos = latent_cosines(latents);

  SyntheticCorpus out;
  std::vector<DocId> resume_ids;
  std::vector<DocId> job_ids;
  for (std::size_t i = 0; i < spec.n_resumes; ++i) resume_ids.push_back(padded('r', i, spec.n_resumes));
  for (std::size_t i = 0; i < spec.n_jobs; ++i) job_ids.push_back(padded('j', i, spec.n_jobs));

  for (std::size_t i = 0; i < spec.n_resumes; ++i) {
    out.corpus.documents.push_back(
        {resume_ids[i], DocKind::resume,
         {{"summary", "candidate profile"}, {"skills", latent_tokens(latents.resumes.col(i))}}});
  }
  for (std::size_t i = 0; i < spec.n_jobs; ++i) {
    out.corpus.documents.push_back(
        {job_ids[i], DocKind::job,
         {{"title", "open position"}, {"requirements", latent_tokens(latents.jobs.col(i))}}});
  }

  out.ground_truth = CompatibilityMatrix(resume_ids, job_ids);
  for (Index r = 0; r < cos.rows(); ++r)
    for (Index j = 0; j < cos.cols(); ++j)
      out.ground_truth.set(r, j, cos(r, j) >= spec.accept_threshold);

  std::mt19937_64 split_rng(derive_seed(spec.seed, "split"));
  std::uniform_real_distribution<double> unif;
  for (const auto& id : job_ids) {
    const double u = unif(split_rng);
    out.job_split[id] = u < spec.train_fraction                         ? Split::train
                        : u < spec.train_fraction + spec.valid_fraction ? Split::valid
                                                                        : Split::test;
  }

  const std::size_t n_pairs = spec.n_resumes * spec.n_jobs;
  const auto n_labeled = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(spec.label_density * static_cast<double>(n_pairs))), 1,
      n_pairs);
  std::vector<std::size_t> all(n_pairs);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  picked.reserve(n_labeled);
  std::mt19937_64 label_rng(derive_seed(spec.seed, "labels"));
  std::sample(all.begin(), all.end(), std::back_inserter(picked), n_labeled, label_rng);
  const double flip_rate = std::min(0.5, spec.noise_sigma);
  std::bernoulli_distribution flip(flip_rate);
  for (std::size_t p : picked) {
    const std::size_t r = p / spec.n_jobs;
    const std::size_t j = p % spec.n_jobs;
    int y = out.ground_truth.at(r, j) ? 1 : 0;
    if (flip_rate > 0.0 && flip(label_rng)) y = 1 - y;
    out.corpus.labels.add({resume_ids[r], job_ids[j], y, out.job_split[job_ids[j]]});
  }
  out.corpus.validate();

  // Base embeddings.
  std::mt19937_64 emb_rng(derive_seed(spec.seed, "embedding"));
  std::normal_distribution<double> gauss;
  const auto D = static_cast<Index>(spec.embedding_dim);
  const auto d = static_cast<Index>(spec.latent_dim);
  Vector scales(d);
  std::uniform_real_distribution<double> log_scale(-1.0, 1.0);
  for (Index k = 0; k < d; ++k) scales(k) = std::exp(log_scale(emb_rng));
  Matrix G(D, D);
  for (Index c = 0; c < D; ++c)
    for (Index r = 0; r < D; ++r) G(r, c) = gauss(emb_rng);
  const Matrix Q = Eigen::HouseholderQR<Matrix>(G).householderQ();

  const std::string provider = "synthetic-s" + std::to_string(spec.seed);
  out.embeddings = EmbeddingStore(provider, D);
  auto embed = [&](const Eigen::Ref<const Vector>& z, double offset) {
    Vector e = Vector::Zero(D);
    e.head(d) = z.cwiseProduct(scales);
    e(d) = offset;
    for (Index k = d + 1; k < D; ++k) e(k) = spec.nuisance_scale * gauss(emb_rng);
    return normalize(Vector(Q * e));
  };
  for (std::size_t i = 0; i < spec.n_resumes; ++i)
    out.embeddings.insert({resume_ids[i], embed(latents.resumes.col(i), spec.kind_offset), provider, false});
  for (std::size_t i = 0; i < spec.n_jobs; ++i)
    out.embeddings.insert({job_ids[i], embed(latents.jobs.col(i), -spec.kind_offset), provider, false});

  out.resume_latents = latents.resumes;
  out.job_latents = latents.jobs;
  return out;
}

EvalTask ground_truth_task(const SyntheticCorpus& s, TaskDirection direction, Split split,
                           std::size_t k) {
  const auto& gt = s.ground_truth;
  std::vector<std::size_t> split_jobs;
  for (std::size_t j = 0; j < gt.job_ids().size(); ++j)
    if (s.job_split.at(gt.job_ids()[j]) == split) split_jobs.push_back(j);

  EvalTask task;
  task.direction = direction;
  task.k = k;
  if (direction == TaskDirection::rank_resume) {
    task.candidate_pool = gt.resume_ids();
    for (std::size_t j : split_jobs) {
      std::set<DocId> rel;
      for (std::size_t r = 0; r < gt.resume_ids().size(); ++r)
        if (gt.at(r, j)) rel.insert(gt.resume_ids()[r]);
      if (rel.empty()) continue;
      task.queries.push_back(gt.job_ids()[j]);
      task.relevant[gt.job_ids()[j]] = std::move(rel);
    }
  } else {
    for (std::size_t j : split_jobs) task.candidate_pool.push_back(gt.job_ids()[j]);
    for (std::size_t r = 0; r < gt.resume_ids().size(); ++r) {
      std::set<DocId> rel;
      for (std::size_t j : split_jobs)
        if (gt.at(r, j)) rel.insert(gt.job_ids()[j]);
      if (rel.empty()) continue;
      task.queries.push_back(gt.resume_ids()[r]);
      task.relevant[gt.resume_ids()[r]] = std::move(rel);
    }
  }
  task.validate();
  return task;
}

void save_synthetic(const SyntheticCorpus& s, const SyntheticSpec& spec,
                    const std::filesystem::path& dir) {
  save_corpus(s.corpus, dir);
  save_embeddings(s.embeddings, dir / "embeddings.jsonl");
  s.ground_truth.save(dir / "ground_truth.jsonl");
  write_json_file(dir / "spec.json", spec.to_json());
}

}  // namespace fitrank
