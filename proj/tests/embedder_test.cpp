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

#include <atomic>
#include <fstream>

#include <gtest/gtest.h>

#include "fitrank/embedder.hpp"
#include "test_util.hpp"

namespace fitrank {
namespace {

class CountingProvider : public EmbeddingProvider {
 public:
  explicit CountingProvider(Index dim, double scale = 1.0) : inner_(dim, 42), scale_(scale) {}
  std::string tag() const override { return "counting"; }
  std::vector<Vector> embed(std::span<const EmbedRequest> batch) override {
    ++calls;
    texts += batch.size();
    std::vector<Vector> out;
    for (const auto& r : batch) out.push_back(scale_ * inner_.embed_text(r.text));
    return out;
  }
  std::atomic<int> calls{0};
  std::atomic<std::size_t> texts{0};

 private:
  RandomProjectionProvider inner_;
  double scale_;
};

// Returns vectors whose dimension grows with every call.
class GrowingProvider : public EmbeddingProvider {
 public:
  std::string tag() const override { return "growing"; }
  std::vector<Vector> embed(std::span<const EmbedRequest> batch) override {
    const Index dim = 8 * (++calls);
    return std::vector<Vector>(batch.size(), Vector::Ones(dim));
  }
  std::atomic<int> calls{0};
};

class FlakyProvider : public EmbeddingProvider {
 public:
  explicit FlakyProvider(int failures) : failures_(failures) {}
  std::string tag() const override { return "flaky"; }
  std::vector<Vector> embed(std::span<const EmbedRequest> batch) override {
    if (attempts++ < failures_) throw std::runtime_error("connection reset");
    return std::vector<Vector>(batch.size(), Vector::Ones(4));
  }
  std::atomic<int> attempts{0};

 private:
  int failures_;
};

std::vector<Document> docs(std::size_t n) {
  std::vector<Document> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({"d" + std::to_string(i), DocKind::resume, {{"skills", "tok" + std::to_string(i)}}});
  return out;
}

EmbedOptions fast() {
  EmbedOptions o;
  o.backoff = std::chrono::milliseconds(0);
  o.batch_size = 2;
  return o;
}

TEST(Normalize, Examples) {
  const Vector v = normalize(Vector{{3.0, 4.0}});
  EXPECT_DOUBLE_EQ(v(0), 0.6);
  EXPECT_DOUBLE_EQ(v(1), 0.8);
  const Vector u = Vector::Unit(5, 2);
  EXPECT_EQ(normalize(u), u);
  EXPECT_THROW(normalize(Vector::Zero(2)), ValidationError);
  EXPECT_THROW(normalize(Vector{{1.0, std::nan("")}}), ValidationError);
}

TEST(EmbeddingStore, EnforcesInvariants) {
  EmbeddingStore s("p", 3);
  s.insert({"a", Vector::Unit(3, 0), "p", false});
  EXPECT_THROW(s.insert({"a", Vector::Unit(3, 1), "p", false}), ValidationError);
  EXPECT_THROW(s.insert({"b", Vector::Unit(4, 1), "p", false}), ValidationError);
  EXPECT_THROW(s.insert({"b", Vector::Unit(3, 1), "q", false}), ValidationError);
  EXPECT_THROW(s.insert({"b", Vector::Ones(3), "p", false}), ValidationError);
  try {
    (void)s.at("zz");
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "missing embedding for zz");
  }
}

TEST(EmbedDocuments, FileProviderGivesUnitVectors) {
  const auto dir = testing::scratch_dir("file_provider");
  {
    std::ofstream out(dir / "raw.jsonl");
    out << R"({"doc_id":"d0","dim":2,"provider":"enc","augmented":false,"vector":[3,4]})" << "\n"
        << R"({"doc_id":"d1","dim":2,"provider":"enc","augmented":false,"vector":[0,2]})" << "\n"
        << R"({"doc_id":"d2","dim":2,"provider":"enc","augmented":false,"vector":[-1,0]})" << "\n";
  }
  FileEmbeddingProvider p(dir / "raw.jsonl");
  const auto store = embed_documents(docs(3), p, nullptr, nullptr, fast());
  ASSERT_EQ(store.size(), 3u);
  for (const auto& [id, r] : store) EXPECT_NEAR(r.vector.norm(), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(store.vector("d0")(0), 0.6);
}

TEST(EmbedDocuments, DimensionMismatchAcrossBatches) {
  GrowingProvider p;
  auto o = fast();
  o.batch_size = 1;
  o.max_in_flight = 1;
  try {
    embed_documents(docs(2), p, nullptr, nullptr, o);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("dimension mismatch"), std::string::npos) << e.what();
  }
}

TEST(EmbedDocuments, CacheHitSkipsProvider) {
  CountingProvider p(16);
  EmbeddingCache cache;
  const auto d = docs(5);
  const auto first = embed_documents(d, p, nullptr, &cache, fast());
  const int calls = p.calls.load();
  EXPECT_GT(calls, 0);
  const auto second = embed_documents(d, p, nullptr, &cache, fast());
  EXPECT_EQ(p.calls.load(), calls);
  for (const auto& [id, r] : first) EXPECT_EQ(r.vector, second.vector(id));  // bitwise
}

TEST(EmbedDocuments, CacheSurvivesSaveLoad) {
  CountingProvider p(8);
  EmbeddingCache cache;
  const auto d = docs(4);
  embed_documents(d, p, nullptr, &cache, fast());
  const auto dir = testing::scratch_dir("cache");
  cache.save(dir / "cache.jsonl");
  EmbeddingCache reloaded;
  reloaded.load(dir / "cache.jsonl");
  const int calls = p.calls.load();
  embed_documents(d, p, nullptr, &reloaded, fast());
  EXPECT_EQ(p.calls.load(), calls);
}

TEST(EmbedDocuments, OverrideTextMarksAugmented) {
  CountingProvider p(8);
  const auto d = docs(2);
  std::map<DocId, std::string> overrides{{"d1", "other text"}};
  const auto store = embed_documents(d, p, &overrides, nullptr, fast());
  EXPECT_FALSE(store.at("d0").augmented);
  EXPECT_TRUE(store.at("d1").augmented);
  RandomProjectionProvider ref(8, 42);
  EXPECT_TRUE(store.vector("d1").isApprox(normalize(ref.embed_text("other text")), 1e-12));
}

TEST(EmbedDocuments, PositiveProviderScalingDoesNotChangeRecords) {
  CountingProvider a(12, 1.0);
  CountingProvider b(12, 37.5);
  const auto d = docs(6);
  const auto sa = embed_documents(d, a, nullptr, nullptr, fast());
  const auto sb = embed_documents(d, b, nullptr, nullptr, fast());
  for (const auto& [id, r] : sa) EXPECT_TRUE(r.vector.isApprox(sb.vector(id), 1e-14));
}

TEST(EmbedDocuments, TransientFailuresAreRetried) {
  FlakyProvider p(2);
  auto o = fast();
  o.batch_size = 10;
  const auto store = embed_documents(docs(3), p, nullptr, nullptr, o);
  EXPECT_EQ(store.size(), 3u);
  EXPECT_EQ(p.attempts.load(), 3);
}

TEST(EmbedDocuments, PersistentFailureListsIds) {
  FlakyProvider p(100);
  auto o = fast();
  o.batch_size = 10;
  try {
    embed_documents(docs(2), p, nullptr, nullptr, o);
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("d0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("d1"), std::string::npos) << msg;
  }
  EXPECT_EQ(p.attempts.load(), 4);
}

TEST(EmbedDocuments, OutputIndependentOfConcurrency) {
  CountingProvider p(16);
  const auto d = docs(40);
  auto serial = fast();
  serial.max_in_flight = 1;
  auto parallel = fast();
  parallel.max_in_flight = 8;
  const auto dir = testing::scratch_dir("concurrency");
  save_embeddings(embed_documents(d, p, nullptr, nullptr, serial), dir / "a.jsonl");
  save_embeddings(embed_documents(d, p, nullptr, nullptr, parallel), dir / "b.jsonl");
  std::ifstream a(dir / "a.jsonl"), b(dir / "b.jsonl");
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}),
            std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST(Embeddings, SaveLoadRoundTrip) {
  const auto store = testing::random_store(testing::numbered('x', 20), 7, 9);
  const auto dir = testing::scratch_dir("emb_roundtrip");
  save_embeddings(store, dir / "e.jsonl");
  const auto back = load_embeddings(dir / "e.jsonl");
  ASSERT_EQ(back.size(), store.size());
  EXPECT_EQ(back.provider(), store.provider());
  for (const auto& [id, r] : store) EXPECT_LT((r.vector - back.vector(id)).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Embeddings, EmptyStoreRoundTrip) {
  const auto dir = testing::scratch_dir("emb_empty");
  save_embeddings(EmbeddingStore{}, dir / "e.jsonl");
  EXPECT_TRUE(std::filesystem::exists(dir / "e.jsonl"));
  EXPECT_EQ(std::filesystem::file_size(dir / "e.jsonl"), 0u);
  EXPECT_TRUE(load_embeddings(dir / "e.jsonl").empty());
}

TEST(Embeddings, TruncatedFileFailsWithLine) {
  const auto store = testing::random_store(testing::numbered('x', 3), 4, 1);
  const auto dir = testing::scratch_dir("emb_trunc");
  save_embeddings(store, dir / "e.jsonl");
  const auto size = std::filesystem::file_size(dir / "e.jsonl");
  std::filesystem::resize_file(dir / "e.jsonl", size - 20);
  try {
    load_embeddings(dir / "e.jsonl");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
  }
}

TEST(EmbeddingCache, KeySeparatesProviderAndText) {
  EXPECT_NE(EmbeddingCache::key("a", "bc"), EmbeddingCache::key("ab", "c"));
  EXPECT_EQ(EmbeddingCache::key("a", "bc"), EmbeddingCache::key("a", "bc"));
  EXPECT_EQ(EmbeddingCache::key("a", "bc").size(), 64u);
}

TEST(RandomProjection, DeterministicAndTokenBased) {
  RandomProjectionProvider p(32, 5);
  EXPECT_EQ(p.embed_text("python sql"), p.embed_text("python sql"));
  EXPECT_TRUE(p.embed_text("python sql").isApprox(p.embed_text("sql python"), 1e-12));
  EXPECT_FALSE(p.embed_text("python").isApprox(p.embed_text("java"), 1e-3));
}

TEST(Sha256, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace fitrank
