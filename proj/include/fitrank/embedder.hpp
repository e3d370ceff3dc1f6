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

#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fitrank/common.hpp"
#include "fitrank/corpus.hpp"

namespace fitrank {

/// L2-normalizes `v`. Throws ValidationError on a zero or non-finite vector.
template <typename Derived>
VectorX<typename Derived::Scalar> normalize(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (!v.allFinite()) throw ValidationError("cannot normalize non-finite vector");
  const Scalar n = v.norm();
  if (!(n > Scalar(0)) || !std::isfinite(static_cast<double>(n)))
    throw ValidationError("cannot normalize zero vector");
  return v / n;
}

/// A unit-norm embedding bound to a document.
struct EmbeddingRecord {
  DocId doc_id;
  Vector vector;
  std::string provider;
  bool augmented = false;

  Index dim() const { return vector.size(); }
};

inline constexpr double kUnitNormTolerance = 1e-6;

/// Immutable-after-build map doc_id -> record; all records share dim and provider.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::string provider, Index dim) : provider_(std::move(provider)), dim_(dim) {}

  /// Validates dim, provider, unit norm, finiteness and uniqueness.
  void insert(EmbeddingRecord record);

  bool contains(const DocId& id) const { return records_.contains(id); }
  /// Throws Error("missing embedding for <id>").
  const EmbeddingRecord& at(const DocId& id) const;
  const Vector& vector(const DocId& id) const { return at(id).vector; }

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  Index dim() const { return dim_; }
  const std::string& provider() const { return provider_; }

  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

  /// Column-stacks the vectors of `ids` into a dim x |ids| matrix.
  Matrix stack(std::span<const DocId> ids) const;

  /// Records of `other` are added; both stores must agree on provider and dim.
  void merge(const EmbeddingStore& other);

 private:
  std::string provider_;
  Index dim_ = 0;
  std::map<DocId, EmbeddingRecord> records_;
};

struct EmbedRequest {
  DocId doc_id;
  std::string text;
};

/// Source of raw (not necessarily normalized) document vectors. Implementations
/// must be safe to call from several threads at once.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string tag() const = 0;
  virtual std::vector<Vector> embed(std::span<const EmbedRequest> batch) = 0;
  /// False when vectors depend on doc_id rather than text; the cache key
  /// then includes the id.
  virtual bool text_keyed() const { return true; }
};

/// Serves vectors from a pre-built embeddings.jsonl keyed by doc_id.
class FileEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit FileEmbeddingProvider(const std::filesystem::path& path);
  std::string tag() const override { return tag_; }
  std::vector<Vector> embed(std::span<const EmbedRequest> batch) override;
  bool text_keyed() const override { return false; }

 private:
  std::string tag_;
  std::map<DocId, Vector> vectors_;
};

/// Deterministic mock encoder: each token of the text is hashed to a seeded
/// Gaussian vector and the token vectors are summed.
class RandomProjectionProvider : public EmbeddingProvider {
 public:
  RandomProjectionProvider(Index dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}
  std::string tag() const override;
  std::vector<Vector> embed(std::span<const EmbedRequest> batch) override;
  Vector embed_text(std::string_view text) const;

 private:
  Index dim_;
  std::uint64_t seed_;
};

/// POST {base_url}/embed {"texts": [...]} -> {"vectors": [[...], ...]}.
/// Bearer token read from FITRANK_EMBED_KEY when set.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string base_url, std::string model_tag);
  std::string tag() const override { return tag_; }
  std::vector<Vector> embed(std::span<const EmbedRequest> batch) override;

 private:
  std::string base_url_;
  std::string tag_;
  std::string api_key_;
};

/// Vectors keyed by sha256(provider tag, text). Thread-safe.
class EmbeddingCache {
 public:
  static std::string key(std::string_view provider, std::string_view text);

  std::optional<Vector> get(const std::string& key) const;
  void put(const std::string& key, const Vector& v);
  std::size_t size() const;

  void load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, Vector> entries_;
};

struct EmbedOptions {
  std::size_t batch_size = 16;
  std::size_t max_in_flight = 4;
  int retries = 3;
  std::chrono::milliseconds backoff{200};
};

/// Embeds every document (text = override if present, else flatten_document)
/// and returns normalized records. Texts already in `cache` are not sent to
/// the provider. Records from an override are flagged `augmented`.
EmbeddingStore embed_documents(std::span<const Document> docs, EmbeddingProvider& provider,
                               const std::map<DocId, std::string>* text_overrides = nullptr,
                               EmbeddingCache* cache = nullptr, const EmbedOptions& options = {});

json embedding_to_json(const EmbeddingRecord& r);
EmbeddingRecord embedding_from_json(const json& j);

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore load_embeddings(const std::filesystem::path& path);

}  // namespace fitrank
