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

#include "fitrank/embedder.hpp"

#include <random>
#include <sstream>
#include <thread>

#include "fitrank/bm25.hpp"
#include "fitrank/parallel.hpp"
#include "http_util.hpp"

namespace fitrank {

void EmbeddingStore::insert(EmbeddingRecord record) {
  if (record.doc_id.empty()) throw ValidationError("embedding record without doc_id");
  if (empty() && dim_ == 0) dim_ = record.dim();
  if (empty() && provider_.empty()) provider_ = record.provider;
  if (record.dim() != dim_) {
    throw ValidationError("dimension mismatch for " + record.doc_id + ": expected " +
                          std::to_string(dim_) + ", got " + std::to_string(record.dim()));
  }
  if (record.provider != provider_) {
    throw ValidationError("provider mismatch for " + record.doc_id + ": expected " + provider_ +
                          ", got " + record.provider);
  }
  if (!record.vector.allFinite())
    throw ValidationError("non-finite embedding for " + record.doc_id);
  if (std::abs(record.vector.norm() - 1.0) > kUnitNormTolerance)
    throw ValidationError("embedding for " + record.doc_id + " is not unit norm");
  if (records_.contains(record.doc_id))
    throw ValidationError("duplicate embedding for " + record.doc_id);
  auto id = record.doc_id;
  records_.emplace(std::move(id), std::move(record));
}

const EmbeddingRecord& EmbeddingStore::at(const DocId& id) const {
  auto it = records_.find(id);
  if (it == records_.end()) throw Error("missing embedding for " + id);
  return it->second;
}

Matrix EmbeddingStore::stack(std::span<const DocId> ids) const {
  Matrix out(dim_, static_cast<Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) out.col(static_cast<Index>(i)) = vector(ids[i]);
  return out;
}

void EmbeddingStore::merge(const EmbeddingStore& other) {
  for (const auto& [_, rec] : other) insert(rec);
}

FileEmbeddingProvider::FileEmbeddingProvider(const std::filesystem::path& path) {
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    auto id = j.at("doc_id").get<std::string>();
    const auto& values = j.at("vector");
    Vector v(static_cast<Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Index>(i)) = values[i].get<double>();
    if (tag_.empty()) tag_ = j.value("provider", std::string("file"));
    vectors_[id] = std::move(v);
  });
  if (tag_.empty()) tag_ = "file";
}

std::vector<Vector> FileEmbeddingProvider::embed(std::span<const EmbedRequest> batch) {
  std::vector<Vector> out;
  out.reserve(batch.size());
  for (const auto& req : batch) {
    auto it = vectors_.find(req.doc_id);
    if (it == vectors_.end()) throw Error("no precomputed embedding for " + req.doc_id);
    out.push_back(it->second);
  }
  return out;
}

std::string RandomProjectionProvider::tag() const {
  return "random-projection-d" + std::to_string(dim_) + "-s" + std::to_string(seed_);
}

Vector RandomProjectionProvider::embed_text(std::string_view text) const {
  Vector v = Vector::Zero(dim_);
  for (const auto& token : tokenize(text)) {
    std::mt19937_64 rng(derive_seed(seed_, token));
    std::normal_distribution<double> gauss;
    for (Index i = 0; i < dim_; ++i) v(i) += gauss(rng);
  }
  if (v.isZero()) v(0) = 1.0;  // empty text
  return v;
}

std::vector<Vector> RandomProjectionProvider::embed(std::span<const EmbedRequest> batch) {
  std::vector<Vector> out;
  out.reserve(batch.size());
  for (const auto& req : batch) out.push_back(embed_text(req.text));
  return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string base_url, std::string model_tag)
    : base_url_(std::move(base_url)),
      tag_(std::move(model_tag)),
      api_key_(detail::env_or_empty("FITRANK_EMBED_KEY")) {}

std::vector<Vector> HttpEmbeddingProvider::embed(std::span<const EmbedRequest> batch) {
  json texts = json::array();
  for (const auto& req : batch) texts.push_back(req.text);
  const json res = detail::post_json(base_url_, "/embed", json{{"texts", texts}}, api_key_);
  const auto& vectors = res.at("vectors");
  if (vectors.size() != batch.size()) {
    throw Error("embedding service returned " + std::to_string(vectors.size()) +
                " vectors for " + std::to_string(batch.size()) + " texts");
  }
  std::vector<Vector> out;
  for (const auto& row : vectors) {
    Vector v(static_cast<Index>(row.size()));
    for (std::size_t i = 0; i < row.size(); ++i) v(static_cast<Index>(i)) = row[i].get<double>();
    out.push_back(std::move(v));
  }
  return out;
}

std::string EmbeddingCache::key(std::string_view provider, std::string_view text) {
  std::string buf;
  buf.reserve(provider.size() + 1 + text.size());
  buf.append(provider);
  buf.push_back('\0');
  buf.append(text);
  return sha256_hex(buf);
}

std::optional<Vector> EmbeddingCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingCache::put(const std::string& key, const Vector& v) {
  std::lock_guard lock(mu_);
  entries_[key] = v;
}

std::size_t EmbeddingCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

void EmbeddingCache::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return;
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    const auto& values = j.at("vector");
    Vector v(static_cast<Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Index>(i)) = values[i].get<double>();
    put(j.at("key").get<std::string>(), v);
  });
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
  std::lock_guard lock(mu_);
  auto out = open_for_write(path);
  for (const auto& [key, v] : entries_) {
    write_jsonl_line(out, json{{"key", key}, {"vector", std::vector<double>(v.begin(), v.end())}});
  }
}

EmbeddingStore embed_documents(std::span<const Document> docs, EmbeddingProvider& provider,
                               const std::map<DocId, std::string>* text_overrides,
                               EmbeddingCache* cache, const EmbedOptions& options) {
  const std::string tag = provider.tag();
  struct Item {
    DocId id;
    std::string text;
    bool augmented = false;
    std::string key;
    std::optional<Vector> raw;
  };
  std::vector<Item> items;
  items.reserve(docs.size());
  for (const auto& d : docs) {
    Item it{d.id, {}, false, {}, std::nullopt};
    if (text_overrides != nullptr) {
      if (auto o = text_overrides->find(d.id); o != text_overrides->end()) {
        it.text = o->second;
        it.augmented = true;
      }
    }
    if (!it.augmented) it.text = flatten_document(d);
    it.key = provider.text_keyed() ? EmbeddingCache::key(tag, it.text)
                                   : EmbeddingCache::key(tag, d.id + '\0' + it.text);
    if (cache != nullptr) it.raw = cache->get(it.key);
    items.push_back(std::move(it));
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (!items[i].raw) pending.push_back(i);

  const std::size_t batch_size = std::max<std::size_t>(1, options.batch_size);
  const std::size_t n_batches = (pending.size() + batch_size - 1) / batch_size;
  std::vector<std::vector<DocId>> failed(n_batches);
  bounded_parallel_for(n_batches, options.max_in_flight, [&](std::size_t b) {
    const std::size_t lo = b * batch_size;
    const std::size_t hi = std::min(pending.size(), lo + batch_size);
    std::vector<EmbedRequest> batch;
    for (std::size_t k = lo; k < hi; ++k) {
      const auto& it = items[pending[k]];
      batch.push_back({it.id, it.text});
    }
    for (int attempt = 0;; ++attempt) {
      try {
        auto vectors = provider.embed(batch);
        if (vectors.size() != batch.size()) throw Error("provider returned wrong batch size");
        for (std::size_t k = lo; k < hi; ++k) items[pending[k]].raw = std::move(vectors[k - lo]);
        return;
      } catch (const std::exception&) {
        if (attempt >= options.retries) break;
        std::this_thread::sleep_for(options.backoff * (1 << attempt));
      }
    }
    for (const auto& req : batch) failed[b].push_back(req.doc_id);
  });

  std::vector<DocId> failed_ids;
  for (const auto& f : failed) failed_ids.insert(failed_ids.end(), f.begin(), f.end());
  if (!failed_ids.empty()) {
    std::ostringstream msg;
    msg << "embedding provider " << tag << " failed for:";
    for (const auto& id : failed_ids) msg << ' ' << id;
    throw Error(msg.str());
  }

  // Merge in document order so the result does not depend on completion order.
  EmbeddingStore store(tag, items.empty() ? 0 : items.front().raw->size());
  for (auto& it : items) {
    if (it.raw->size() != store.dim()) {
      throw ValidationError("dimension mismatch for " + it.id + ": expected " +
                            std::to_string(store.dim()) + ", got " +
                            std::to_string(it.raw->size()));
    }
    if (cache != nullptr) cache->put(it.key, *it.raw);
    store.insert({it.id, normalize(*it.raw), tag, it.augmented});
  }
  return store;
}

json embedding_to_json(const EmbeddingRecord& r) {
  return json{{"doc_id", r.doc_id},
              {"dim", r.dim()},
              {"provider", r.provider},
              {"augmented", r.augmented},
              {"vector", std::vector<double>(r.vector.begin(), r.vector.end())}};
}

EmbeddingRecord embedding_from_json(const json& j) {
  EmbeddingRecord r;
  r.doc_id = j.at("doc_id").get<std::string>();
  r.provider = j.at("provider").get<std::string>();
  r.augmented = j.at("augmented").get<bool>();
  const auto dim = j.at("dim").get<Index>();
  const auto& values = j.at("vector");
  if (!values.is_array() || static_cast<Index>(values.size()) != dim) {
    throw ValidationError("vector length does not match dim for " + r.doc_id);
  }
  r.vector.resize(dim);
  for (Index i = 0; i < dim; ++i) r.vector(i) = values[static_cast<std::size_t>(i)].get<double>();
  return r;
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  for (const auto& [_, rec] : store) write_jsonl_line(out, embedding_to_json(rec));
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  EmbeddingStore store;
  for_each_jsonl(path, [&](const json& j, std::size_t) { store.insert(embedding_from_json(j)); });
  return store;
}

}  // namespace fitrank
