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

#include "fitrank/augment.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <set>
#include <thread>

#include "fitrank/parallel.hpp"
#include "http_util.hpp"

namespace fitrank {

namespace {

std::string strip(std::string_view s) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

void block(std::string& out, std::string_view start, std::string_view body, std::string_view end) {
  out.append(start).append("\n\n");
  out.append(body).append("\n\n");
  out.append(end).append("\n\n");
}

}  // namespace

std::string render_prompt(std::span<const std::pair<std::string, std::string>> examples,
                          std::string_view target_job_text) {
  if (examples.empty()) throw ValidationError("prompt needs at least one example pair");
  std::string out;
  out.append(kHyReHeader).append("\n\n");
  for (const auto& [job, resume] : examples) {
    block(out, "[The start of the example job]", job, "[The end of the example job]");
    block(out, "[The start of the example resume]", resume, "[The end of the example resume]");
  }
  out.append(kHyReInstruction).append("\n\n");
  out.append(kTargetJobStart).append("\n\n");
  out.append(target_job_text).append("\n\n");
  out.append(kTargetJobEnd).append("\n");
  return out;
}

HyRePrompt build_prompt(std::span<const std::pair<Document, Document>> examples,
                        const Document& target, std::size_t n_shots) {
  if (n_shots == 0) throw ValidationError("n_shots must be at least 1");
  if (n_shots > examples.size())
    throw ValidationError("n_shots " + std::to_string(n_shots) + " exceeds the " +
                          std::to_string(examples.size()) + " available examples");
  HyRePrompt p;
  for (std::size_t i = 0; i < n_shots; ++i) {
    const auto& [job, resume] = examples[i];
    if (job.kind != DocKind::job || resume.kind != DocKind::resume)
      throw ValidationError("example pair must be (job, resume)");
    p.example_pairs.emplace_back(flatten_document(job), flatten_document(resume));
  }
  p.target_job_text = flatten_document(target);
  p.rendered = render_prompt(p.example_pairs, p.target_job_text);
  return p;
}

EchoLlmClient::EchoLlmClient()
    : FunctionLlmClient("echo", [](const std::string& prompt) {
        const auto start = prompt.rfind(kTargetJobStart);
        const auto end = prompt.rfind(kTargetJobEnd);
        if (start == std::string::npos || end == std::string::npos || end < start) return prompt;
        const auto from = start + kTargetJobStart.size();
        return prompt.substr(from, end - from);
      }) {}

HttpLlmClient::HttpLlmClient(std::string base_url, std::string model, double temperature)
    : base_url_(std::move(base_url)),
      model_(std::move(model)),
      temperature_(temperature),
      api_key_(detail::env_or_empty("FITRANK_LLM_KEY")) {}

std::string HttpLlmClient::complete(const std::string& prompt) {
  const json body = {{"model", model_},
                     {"temperature", temperature_},
                     {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  const json res = detail::post_json(base_url_, "/chat/completions", body, api_key_);
  try {
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed completion response: ") + e.what());
  }
}

std::string GenerationCache::key(std::string_view model, std::string_view prompt) {
  std::string buf;
  buf.reserve(model.size() + 1 + prompt.size());
  buf.append(model);
  buf.push_back('\0');
  buf.append(prompt);
  return sha256_hex(buf);
}

std::optional<std::string> GenerationCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void GenerationCache::put(const std::string& key, std::string value) {
  std::lock_guard lock(mu_);
  entries_[key] = std::move(value);
}

std::size_t GenerationCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::string generate_hypothetical_resume(const HyRePrompt& prompt, LlmClient& client,
                                         GenerationCache* cache, const RetryPolicy& retry) {
  const std::string key = GenerationCache::key(client.model(), prompt.rendered);
  if (cache) {
    if (auto hit = cache->get(key)) return *hit;
  }
  std::string raw;
  for (int attempt = 0;; ++attempt) {
    try {
      raw = client.complete(prompt.rendered);
      break;
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      if (attempt >= retry.retries)
        throw Error("LLM " + client.model() + " failed after " + std::to_string(attempt + 1) +
                    " attempts: " + e.what());
      std::this_thread::sleep_for(retry.backoff * (1 << attempt));
    }
  }
  std::string text = strip(raw);
  if (text.empty()) throw ValidationError("empty generation");
  if (cache) cache->put(key, text);
  return text;
}

AugmentedJob augment_job(const Document& job, const std::string& resume_text,
                         std::string llm_model, std::string prompt_hash) {
  if (resume_text.empty()) throw ValidationError("empty resume text for job " + job.id);
  AugmentedJob a;
  a.job_id = job.id;
  a.original_text = flatten_document(job);
  a.generated_resume = resume_text;
  a.combined_text = a.original_text;
  a.combined_text.append("\n").append(kExampleResumeMarker).append("\n").append(resume_text);
  a.llm_model = std::move(llm_model);
  a.prompt_hash = std::move(prompt_hash);
  return a;
}

json augmented_to_json(const AugmentedJob& a) {
  return {{"job_id", a.job_id},
          {"llm_model", a.llm_model},
          {"prompt_hash", a.prompt_hash},
          {"generated_resume", a.generated_resume},
          {"combined_text", a.combined_text},
          {"original_text", a.original_text}};
}

AugmentedJob augmented_from_json(const json& j) {
  AugmentedJob a;
  a.job_id = j.at("job_id").get<std::string>();
  a.llm_model = j.value("llm_model", "");
  a.prompt_hash = j.value("prompt_hash", "");
  a.generated_resume = j.at("generated_resume").get<std::string>();
  a.combined_text = j.at("combined_text").get<std::string>();
  a.original_text = j.value("original_text", "");
  return a;
}

void write_augmentations(std::span<const AugmentedJob> jobs, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (const auto& a : jobs) write_jsonl_line(out, augmented_to_json(a));
}

std::map<DocId, AugmentedJob> read_augmentations(const std::filesystem::path& path) {
  std::map<DocId, AugmentedJob> out;
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    auto a = augmented_from_json(j);
    out[a.job_id] = std::move(a);
  });
  return out;
}

AugmentRun augment_jobs(const Corpus& corpus, std::span<const DocId> job_ids, LlmClient& client,
                        const AugmentOptions& options, GenerationCache* cache) {
  if (options.n_shots == 0) throw ValidationError("n_shots must be at least 1");
  const auto accepted = corpus.labels.filter(Split::train).positive_pairs();
  if (accepted.size() < options.n_shots)
    throw ValidationError("need " + std::to_string(options.n_shots) +
                          " accepted training pairs for few-shot examples, found " +
                          std::to_string(accepted.size()));

  AugmentRun run;
  std::mt19937_64 rng(derive_seed(options.seed, "few-shot"));
  std::sample(accepted.begin(), accepted.end(), std::back_inserter(run.few_shot_pairs),
              static_cast<std::ptrdiff_t>(options.n_shots), rng);
  std::vector<std::pair<Document, Document>> examples;
  for (const auto& [r, j] : run.few_shot_pairs) examples.emplace_back(corpus.at(j), corpus.at(r));

  std::vector<HyRePrompt> prompts;
  std::map<std::string, std::size_t> distinct;  // prompt hash -> first prompt index
  std::vector<std::string> hashes;
  for (const auto& id : job_ids) {
    const Document& job = corpus.at(id);
    if (job.kind != DocKind::job) throw ValidationError("only jobs are augmented, got " + id);
    prompts.push_back(build_prompt(examples, job, options.n_shots));
    hashes.push_back(GenerationCache::key(client.model(), prompts.back().rendered));
    distinct.try_emplace(hashes.back(), prompts.size() - 1);
  }

  GenerationCache local;
  GenerationCache* c = cache ? cache : &local;
  std::vector<std::size_t> todo;
  for (const auto& [hash, idx] : distinct) todo.push_back(idx);
  bounded_parallel_for(todo.size(), options.max_in_flight, [&](std::size_t k) {
    generate_hypothetical_resume(prompts[todo[k]], client, c, options.retry);
  });

  for (std::size_t i = 0; i < job_ids.size(); ++i) {
    const auto text = c->get(hashes[i]);
    run.jobs.push_back(augment_job(corpus.at(job_ids[i]), *text, client.model(), hashes[i]));
  }
  return run;
}

std::map<DocId, std::string> combined_texts(std::span<const AugmentedJob> jobs) {
  std::map<DocId, std::string> out;
  for (const auto& a : jobs) out[a.job_id] = a.combined_text;
  return out;
}

DocId select_centroid_resume(const EmbeddingStore& store, std::span<const DocId> accepted,
                             std::span<const DocId> pool) {
  if (accepted.empty()) throw ValidationError("empty accepted set");
  if (pool.empty()) throw ValidationError("empty resume pool");
  Matrix A(store.dim(), static_cast<Index>(accepted.size()));
  for (std::size_t i = 0; i < accepted.size(); ++i)
    A.col(static_cast<Index>(i)) = normalize(store.vector(accepted[i]));

  std::optional<DocId> best;
  double best_score = 0.0;
  for (const auto& id : pool) {
    const Vector v = normalize(store.vector(id));
    const double score = (A.transpose() * v).mean();
    if (!best || score > best_score || (score == best_score && id < *best)) {
      best = id;
      best_score = score;
    }
  }
  return *best;
}

}  // namespace fitrank
