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

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fitrank/common.hpp"
#include "fitrank/corpus.hpp"
#include "fitrank/embedder.hpp"
#include "fitrank/jsonl.hpp"

namespace fitrank {

inline constexpr std::string_view kHyReHeader = "Here is a template pair of matching resume and job:";
inline constexpr std::string_view kHyReInstruction =
    "You are a helpful assistant. Following the above example pair of job and resume, construct "
    "an ideal resume for the target job shown below. You should strictly follow the format of "
    "the given pairs, make sure the resume you give perfectly matches the target job, and "
    "directly return your answer in plain text.";
inline constexpr std::string_view kTargetJobStart = "[The start of the target job]";
inline constexpr std::string_view kTargetJobEnd = "[The end of the target job]";
inline constexpr std::string_view kExampleResumeMarker = "[\"An Example Resume\"]";

struct HyRePrompt {
  std::vector<std::pair<std::string, std::string>> example_pairs;  // (job_text, resume_text)
  std::string target_job_text;
  std::string rendered;
};

/// Renders the few-shot template: the header line once, then one job block
/// and one resume block per example, the instruction, and the target job.
/// Blocks are separated by blank lines.
std::string render_prompt(std::span<const std::pair<std::string, std::string>> examples,
                          std::string_view target_job_text);

/// Uses the first `n_shots` (job, resume) examples, flattened.
HyRePrompt build_prompt(std::span<const std::pair<Document, Document>> examples,
                        const Document& target, std::size_t n_shots);

/// Chat-completion backend. Implementations must be thread-safe.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string model() const = 0;
  virtual std::string complete(const std::string& prompt) = 0;
};

/// Test double driven by a callback; counts calls.
class FunctionLlmClient : public LlmClient {
 public:
  FunctionLlmClient(std::string model, std::function<std::string(const std::string&)> fn)
      : model_(std::move(model)), fn_(std::move(fn)) {}
  std::string model() const override { return model_; }
  std::string complete(const std::string& prompt) override {
    ++calls_;
    return fn_(prompt);
  }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::string model_;
  std::function<std::string(const std::string&)> fn_;
  std::atomic<std::size_t> calls_{0};
};

/// Offline mock: answers with the target job text found in the prompt.
class EchoLlmClient : public FunctionLlmClient {
 public:
  EchoLlmClient();
};

/// POST {base_url}/chat/completions; bearer token from FITRANK_LLM_KEY.
class HttpLlmClient : public LlmClient {
 public:
  HttpLlmClient(std::string base_url, std::string model, double temperature = 0.0);
  std::string model() const override { return model_; }
  std::string complete(const std::string& prompt) override;

 private:
  std::string base_url_;
  std::string model_;
  double temperature_;
  std::string api_key_;
};

/// Completions keyed by sha256(model, prompt). Thread-safe.
class GenerationCache {
 public:
  static std::string key(std::string_view model, std::string_view prompt);
  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, std::string value);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> entries_;
};

struct RetryPolicy {
  int retries = 3;
  std::chrono::milliseconds backoff{200};
};

/// Calls the client (unless cached) and strips surrounding whitespace.
/// Transport errors are retried with exponential backoff. Throws
/// ValidationError("empty generation") on a blank completion.
std::string generate_hypothetical_resume(const HyRePrompt& prompt, LlmClient& client,
                                         GenerationCache* cache = nullptr,
                                         const RetryPolicy& retry = {});

struct AugmentedJob {
  DocId job_id;
  std::string original_text;
  std::string generated_resume;
  std::string combined_text;
  std::string llm_model;
  std::string prompt_hash;

  bool operator==(const AugmentedJob&) const = default;
};

/// combined_text = flatten(job) + "\n" + ["An Example Resume"] + "\n" + resume_text.
AugmentedJob augment_job(const Document& job, const std::string& resume_text,
                         std::string llm_model = {}, std::string prompt_hash = {});

json augmented_to_json(const AugmentedJob& a);
AugmentedJob augmented_from_json(const json& j);
void write_augmentations(std::span<const AugmentedJob> jobs, const std::filesystem::path& path);
/// Keyed by job id; a repeated job id keeps the last entry.
std::map<DocId, AugmentedJob> read_augmentations(const std::filesystem::path& path);

struct AugmentOptions {
  std::size_t n_shots = 1;
  std::uint64_t seed = 0;
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
};

struct AugmentRun {
  std::vector<AugmentedJob> jobs;
  /// The accepted training pairs used as few-shot examples, (resume, job).
  std::vector<std::pair<DocId, DocId>> few_shot_pairs;
};

/// Chooses n_shots accepted training pairs with a seeded draw, builds one
/// prompt per job and generates at most once per distinct prompt.
AugmentRun augment_jobs(const Corpus& corpus, std::span<const DocId> job_ids, LlmClient& client,
                        const AugmentOptions& options, GenerationCache* cache = nullptr);

/// Job id -> combined_text, for embedding overrides.
std::map<DocId, std::string> combined_texts(std::span<const AugmentedJob> jobs);

/// The pool resume with the largest mean cosine to the accepted resumes;
/// ties go to the smaller id.
DocId select_centroid_resume(const EmbeddingStore& store, std::span<const DocId> accepted,
                             std::span<const DocId> pool);

}  // namespace fitrank
