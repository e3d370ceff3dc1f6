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

#include "fitrank/pipeline.hpp"

#include <atomic>
#include <set>
#include <sstream>

#include "fitrank/corpus.hpp"
#include "fitrank/jsonl.hpp"

namespace fs = std::filesystem;

namespace fitrank {

json RunConfig::to_json() const {
  json tasks_json = json::array();
  for (auto t : tasks) tasks_json.push_back(std::string(to_string(t)));
  return {
      {"seed", seed ? json(*seed) : json(nullptr)},
      {"paths",
       {{"corpus", corpus_dir.string()},
        {"embeddings", embeddings.string()},
        {"ledger", ledger.string()},
        {"attributes", attributes.string()},
        {"out", out_dir.string()}}},
      {"embedder",
       {{"provider", embed_provider}, {"dim", embed_dim}, {"url", embed_url}, {"model", embed_model}}},
      {"hyre",
       {{"enabled", augment},
        {"target", augment_target},
        {"n_shots", n_shots},
        {"provider", llm_provider},
        {"model", llm_model},
        {"url", llm_url},
        {"temperature", llm_temperature}}},
      {"mining",
       {{"strategy", std::string(to_string(mining_strategy))},
        {"range", {range.lo, range.hi}},
        {"n_per_anchor", n_per_anchor},
        {"bm25_k", bm25_k},
        {"global", mining_global}}},
      {"train", train.to_json()},
      {"iterations", iterations},
      {"continue", continue_training},
      {"eval", {{"tasks", tasks_json}, {"k", k_values}, {"bias_attribute", bias_attribute}}},
  };
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    c.corpus_dir = p.value("corpus", "");
    c.embeddings = p.value("embeddings", "");
    c.ledger = p.value("ledger", "");
    c.attributes = p.value("attributes", "");
    c.out_dir = p.value("out", "");
  }
  if (j.contains("embedder")) {
    const auto& e = j.at("embedder");
    c.embed_provider = e.value("provider", c.embed_provider);
    c.embed_dim = e.value("dim", c.embed_dim);
    c.embed_url = e.value("url", c.embed_url);
    c.embed_model = e.value("model", c.embed_model);
  }
  if (j.contains("hyre")) {
    const auto& h = j.at("hyre");
    c.augment = h.value("enabled", c.augment);
    c.augment_target = h.value("target", c.augment_target);
    c.n_shots = h.value("n_shots", c.n_shots);
    c.llm_provider = h.value("provider", c.llm_provider);
    c.llm_model = h.value("model", c.llm_model);
    c.llm_url = h.value("url", c.llm_url);
    c.llm_temperature = h.value("temperature", c.llm_temperature);
  }
  if (j.contains("mining")) {
    const auto& m = j.at("mining");
    if (m.contains("strategy"))
      c.mining_strategy = parse_mining_strategy(m.at("strategy").get<std::string>());
    if (m.contains("range")) {
      c.range.lo = m.at("range").at(0).get<double>();
      c.range.hi = m.at("range").at(1).get<double>();
    }
    c.n_per_anchor = m.value("n_per_anchor", c.n_per_anchor);
    c.bm25_k = m.value("bm25_k", c.bm25_k);
    c.mining_global = m.value("global", c.mining_global);
  }
  if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
  c.iterations = j.value("iterations", c.iterations);
  c.continue_training = j.value("continue", c.continue_training);
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    if (e.contains("tasks")) {
      c.tasks.clear();
      for (const auto& t : e.at("tasks")) c.tasks.push_back(parse_task_direction(t.get<std::string>()));
    }
    if (e.contains("k")) c.k_values = e.at("k").get<std::vector<std::size_t>>();
    c.bias_attribute = e.value("bias_attribute", c.bias_attribute);
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  try {
    return RunConfig::from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> validate_config(const RunConfig& c) {
  std::vector<std::string> d;
  if (!c.seed) d.push_back("seed is required");
  if (c.out_dir.empty()) d.push_back("output directory is required");

  if (c.corpus_dir.empty())
    d.push_back("corpus directory is required");
  else if (!fs::exists(c.corpus_dir / "documents.jsonl"))
    d.push_back("corpus not found: " + (c.corpus_dir / "documents.jsonl").string());

  if (c.embed_provider == "file") {
    if (c.embeddings.empty() || !fs::exists(c.embeddings))
      d.push_back("file embedding provider needs an existing embeddings path");
  } else if (c.embed_provider == "http") {
    if (c.embed_url.empty()) d.push_back("http embedding provider needs a url");
  } else if (c.embed_provider == "random-projection") {
    if (c.embed_dim <= 0) d.push_back("embedding dim must be positive");
  } else {
    d.push_back("unknown embedding provider " + c.embed_provider);
  }

  if (c.augment) {
    if (c.augment_target != "job") d.push_back("augmentation applies to jobs only, not " + c.augment_target);
    if (c.n_shots == 0) d.push_back("n_shots must be at least 1");
    if (c.llm_provider == "http") {
      if (c.llm_url.empty()) d.push_back("http LLM provider needs a url");
    } else if (c.llm_provider == "ledger") {
      if (c.ledger.empty() || !fs::exists(c.ledger))
        d.push_back("ledger replay needs an existing ledger path");
    } else if (c.llm_provider != "echo") {
      d.push_back("unknown LLM provider " + c.llm_provider);
    }
    if (!(c.llm_temperature >= 0.0)) d.push_back("LLM temperature must be non-negative");
  }

  if (!std::isfinite(c.range.lo) || !std::isfinite(c.range.hi))
    d.push_back("percentile range must be finite");
  else if (c.range.lo >= c.range.hi)
    d.push_back("percentile range empty");
  else if (c.range.lo < 0.0 || c.range.hi > 100.0)
    d.push_back("percentile range must lie within [0, 100]");
  if (c.n_per_anchor == 0) d.push_back("n_per_anchor must be positive");
  if (c.mining_strategy == MiningStrategy::bm25_topk && c.bm25_k == 0)
    d.push_back("bm25_k must be positive");

  try {
    c.train.validate();
  } catch (const ValidationError& e) {
    d.push_back(e.what());
  }
  if (c.iterations < 1) d.push_back("iterations must be at least 1");
  if (c.tasks.empty()) d.push_back("at least one evaluation task is required");
  if (c.k_values.empty()) d.push_back("at least one K is required");
  for (auto k : c.k_values)
    if (k == 0) d.push_back("K must be positive");
  if (!c.attributes.empty() && !fs::exists(c.attributes))
    d.push_back("attributes file not found: " + c.attributes.string());
  return d;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const RunConfig& c) {
  if (c.embed_provider == "file") return std::make_unique<FileEmbeddingProvider>(c.embeddings);
  if (c.embed_provider == "http")
    return std::make_unique<HttpEmbeddingProvider>(c.embed_url, c.embed_model);
  if (c.embed_provider == "random-projection")
    return std::make_unique<RandomProjectionProvider>(c.embed_dim, c.seed.value_or(0));
  throw ValidationError("unknown embedding provider " + c.embed_provider);
}

std::unique_ptr<LlmClient> make_llm_client(const RunConfig& c) {
  if (c.llm_provider == "http")
    return std::make_unique<HttpLlmClient>(c.llm_url, c.llm_model, c.llm_temperature);
  if (c.llm_provider == "echo") return std::make_unique<EchoLlmClient>();
  if (c.llm_provider == "ledger") return nullptr;
  throw ValidationError("unknown LLM provider " + c.llm_provider);
}

namespace {

class CountingEmbedder : public EmbeddingProvider {
 public:
  explicit CountingEmbedder(EmbeddingProvider& inner) : inner_(inner) {}
  std::string tag() const override { return inner_.tag(); }
  bool text_keyed() const override { return inner_.text_keyed(); }
  std::vector<Vector> embed(std::span<const EmbedRequest> batch) override {
    ++calls;
    return inner_.embed(batch);
  }
  std::atomic<std::size_t> calls{0};

 private:
  EmbeddingProvider& inner_;
};

class CountingLlm : public LlmClient {
 public:
  explicit CountingLlm(LlmClient& inner) : inner_(inner) {}
  std::string model() const override { return inner_.model(); }
  std::string complete(const std::string& prompt) override {
    ++calls;
    return inner_.complete(prompt);
  }
  std::atomic<std::size_t> calls{0};

 private:
  LlmClient& inner_;
};

// Prefixes errors with the failing stage while keeping the error category.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("stage ") + name + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(std::string("stage ") + name + ": " + e.what());
  }
}

json input_hashes(const RunConfig& c) {
  json h = json::object();
  const auto add = [&](const char* name, const fs::path& p) {
    if (!p.empty() && fs::exists(p)) h[name] = sha256_file(p);
  };
  add("documents", c.corpus_dir / "documents.jsonl");
  add("labels", c.corpus_dir / "labels.jsonl");
  add("embeddings", c.embeddings);
  add("ledger", c.ledger);
  add("attributes", c.attributes);
  return h;
}

std::vector<DocId> unique_in_order(const std::vector<std::pair<DocId, DocId>>& pairs, bool first) {
  std::vector<DocId> out;
  std::set<DocId> seen;
  for (const auto& p : pairs) {
    const DocId& id = first ? p.first : p.second;
    if (seen.insert(id).second) out.push_back(id);
  }
  return out;
}

std::string iteration_dir(int t) { return "iter" + std::to_string(t); }

}  // namespace

PipelineReport run_pipeline(const RunConfig& config) {
  const auto diagnostics = validate_config(config);
  if (!diagnostics.empty()) {
    std::ostringstream os;
    for (const auto& d : diagnostics) os << "\n  " << d;
    throw ValidationError("invalid config:" + os.str());
  }
  auto embedder = make_embedding_provider(config);
  auto llm = config.augment ? make_llm_client(config) : nullptr;
  return run_pipeline(config, llm.get(), embedder.get());
}

PipelineReport run_pipeline(const RunConfig& config, LlmClient* llm_in,
                            EmbeddingProvider* embedder_in) {
  const auto diagnostics = validate_config(config);
  if (!diagnostics.empty()) {
    std::ostringstream os;
    for (const auto& d : diagnostics) os << "\n  " << d;
    throw ValidationError("invalid config:" + os.str());
  }
  if (!embedder_in) throw ValidationError("no embedding provider");
  const std::uint64_t seed = *config.seed;
  const fs::path out = config.out_dir;
  fs::create_directories(out);

  PipelineReport report;
  CountingEmbedder embedder(*embedder_in);
  std::optional<CountingLlm> llm;
  if (llm_in) llm.emplace(*llm_in);

  // Artifacts are reused only when the recorded run state matches exactly.
  const json state = {{"config", config.to_json()}, {"inputs", input_hashes(config)}};
  const fs::path state_path = out / "run_state.json";
  const bool resumable = fs::exists(state_path) && read_json_file(state_path) == state;
  if (!resumable) write_json_file(state_path, state);
  const auto reuse = [&](const fs::path& p) {
    if (resumable && fs::exists(p)) {
      report.reused.push_back(fs::relative(p, out).generic_string());
      return true;
    }
    return false;
  };

  Corpus corpus = stage("ingest", [&] { return load_corpus(config.corpus_dir); });
  const auto resume_ids = corpus.ids_of(DocKind::resume);
  const auto job_ids = corpus.ids_of(DocKind::job);
  const LabelSet train_labels = corpus.labels.filter(Split::train);
  const auto positives = train_labels.positive_pairs();

  // augment
  std::map<DocId, std::string> overrides;
  json run_notes = json::object();
  if (config.augment) {
    const fs::path path = out / "augmentations.jsonl";
    const fs::path few_shot_path = out / "few_shot.json";
    stage("augment", [&] {
      std::vector<AugmentedJob> jobs;
      if (reuse(path)) {
        for (auto& [id, a] : read_augmentations(path)) jobs.push_back(std::move(a));
      } else if (config.llm_provider == "ledger" && !llm) {
        const auto ledger = read_augmentations(config.ledger);
        for (const auto& id : job_ids) {
          const auto it = ledger.find(id);
          if (it == ledger.end()) throw ValidationError("no ledger entry for job " + id);
          jobs.push_back(it->second);
        }
        write_augmentations(jobs, path);
      } else {
        if (!llm) throw ValidationError("no LLM client");
        AugmentOptions opts;
        opts.n_shots = config.n_shots;
        opts.seed = seed;
        auto run = augment_jobs(corpus, job_ids, *llm, opts);
        jobs = std::move(run.jobs);
        json pairs = json::array();
        for (const auto& [r, j] : run.few_shot_pairs) pairs.push_back({r, j});
        write_json_file(few_shot_path, {{"few_shot_pairs", pairs}});
        write_augmentations(jobs, path);
      }
      overrides = combined_texts(jobs);
      if (fs::exists(few_shot_path))
        run_notes["few_shot_pairs"] = read_json_file(few_shot_path).at("few_shot_pairs");
    });
  }

  // embed
  EmbeddingStore store = stage("embed", [&] {
    const fs::path path = out / "embeddings.jsonl";
    if (reuse(path)) return load_embeddings(path);
    auto s = embed_documents(corpus.documents, embedder, config.augment ? &overrides : nullptr);
    save_embeddings(s, path);
    return s;
  });

  // validation task for early stopping, when the corpus has one
  std::optional<EvalTask> validation;
  {
    const LabelSet valid = corpus.labels.filter(Split::valid);
    if (!valid.positive_pairs().empty())
      validation = make_task(TaskDirection::rank_resume, valid, resume_ids, config.k_values.front());
  }
  Validator validator;
  if (validation)
    validator = [&](const AdapterParams& a) { return evaluate(*validation, a, store).macro_ndcg; };

  // The texts BM25 mining sees: augmented where available.
  std::map<DocId, std::string> texts;
  if (config.mining_strategy == MiningStrategy::bm25_topk)
    for (const auto& d : corpus.documents) {
      const auto it = overrides.find(d.id);
      texts[d.id] = it != overrides.end() ? it->second : flatten_document(d);
    }

  const auto resume_anchors = unique_in_order(positives, true);
  const auto job_anchors = unique_in_order(positives, false);
  const auto mine = [&](const AdapterParams& previous, int t) {
    const std::uint64_t s = derive_seed(seed, "mine-" + std::to_string(t));
    const auto rd = MiningDirection::negatives_for_resume_anchor;
    const auto jd = MiningDirection::negatives_for_job_anchor;
    MinedNegatives m;
    switch (config.mining_strategy) {
      case MiningStrategy::rum: {
        const auto fn = embedding_score_fn(store, previous);
        const auto rum = config.mining_global ? rum_mine_global : rum_mine;
        m.for_resume = rum(resume_anchors, job_ids, fn, train_labels, rd, config.range, config.n_per_anchor, s);
        m.for_job = rum(job_anchors, resume_ids, fn, train_labels, jd, config.range, config.n_per_anchor, s);
        break;
      }
      case MiningStrategy::bm25_topk:
        m.for_resume = bm25_topk_mine(resume_anchors, job_ids, texts, config.bm25_k, train_labels, rd);
        m.for_job = bm25_topk_mine(job_anchors, resume_ids, texts, config.bm25_k, train_labels, jd);
        break;
      case MiningStrategy::rejected:
        m.for_resume = rejected_mine(resume_anchors, train_labels, rd);
        m.for_job = rejected_mine(job_anchors, train_labels, jd);
        break;
      case MiningStrategy::random:
        m.for_resume = random_mine(resume_anchors, job_ids, train_labels, rd, config.n_per_anchor, s);
        m.for_job = random_mine(job_anchors, resume_ids, train_labels, jd, config.n_per_anchor, s);
        break;
    }
    return m;
  };

  AdapterCheckpoint current;
  for (int t = 1; t <= config.iterations; ++t) {
    const fs::path dir = out / iteration_dir(t);
    const fs::path adapter_path = dir / "adapter.json";
    std::optional<MinedNegatives> negs;
    if (t >= 2) {
      negs = stage("mine", [&] {
        const fs::path rp = dir / "negatives_resume.jsonl";
        const fs::path jp = dir / "negatives_job.jsonl";
        if (reuse(rp) && reuse(jp)) return MinedNegatives{read_negatives(rp), read_negatives(jp)};
        auto m = mine(current.adapter, t);
        write_negatives(m.for_resume, rp);
        write_negatives(m.for_job, jp);
        return m;
      });
    }
    current = stage("train", [&] {
      if (reuse(adapter_path)) return load_adapter(adapter_path);
      if (positives.empty()) throw ValidationError("no positive training pairs");
      HardNegatives hn;
      if (negs) {
        hn.for_resume = &negs->for_resume;
        hn.for_job = &negs->for_job;
      }
      const AdapterParams* init =
          (t >= 2 && config.continue_training) ? &current.adapter : nullptr;
      auto result = train_adapter(positives, store, hn, config.train, validator, init);
      write_train_log(result.log, dir / "train_log.jsonl");
      if (!result.validation.empty())
        report.validation_ndcg.push_back(result.validation[result.best_epoch - 1]);
      AdapterCheckpoint ckpt;
      ckpt.adapter = result.adapter;
      ckpt.train_config = config.train.to_json();
      ckpt.provenance = {{"negatives_strategy", t == 1 ? "none" : std::string(to_string(config.mining_strategy))},
                         {"range", t >= 2 && config.mining_strategy == MiningStrategy::rum
                                       ? json{config.range.lo, config.range.hi}
                                       : json(nullptr)},
                         {"iteration", t}};
      save_adapter(ckpt, adapter_path);
      return ckpt;
    });
  }
  save_adapter(current, out / "adapter.json");

  // eval
  stage("eval", [&] {
    const LabelSet test = corpus.labels.filter(Split::test);
    json skipped = json::array();
    for (auto direction : config.tasks) {
      for (auto k : config.k_values) {
        const auto& pool = direction == TaskDirection::rank_resume ? resume_ids : job_ids;
        if (test.positive_pairs().empty()) {
          skipped.push_back(std::string(to_string(direction)) + "@" + std::to_string(k));
          continue;
        }
        auto task = make_task(direction, test, pool, k);
        auto r = evaluate(task, current.adapter, store);
        r.adapter_provenance = current.provenance;
        write_report(r, out / ("report_" + std::string(to_string(direction)) + "_k" +
                               std::to_string(k) + ".json"));
        report.reports.push_back(std::move(r));
      }
    }
    auto table = open_for_write(out / "metrics.txt");
    table << format_metrics_table(report.reports);
    run_notes["skipped_tasks"] = skipped;
  });

  // bias
  if (!config.attributes.empty()) {
    stage("bias", [&] {
      const auto attrs = load_attributes(config.attributes, config.bias_attribute);
      std::vector<RankingResult> rankings;
      for (const auto& r : report.reports)
        if (r.task == to_string(TaskDirection::rank_resume) && r.k == config.k_values.front())
          rankings = r.rankings;
      report.bias = bias_report(rankings, attrs, config.bias_attribute, resume_ids);
      write_json_file(out / "bias.json", bias_to_json(*report.bias));
      auto table = open_for_write(out / "bias.txt");
      table << format_bias_table({{"adapter", *report.bias}});
    });
  }

  run_notes["embedding_provider"] = store.provider();
  run_notes["augmented_jobs"] = overrides.size();
  run_notes["truncation"] = "delegated to the embedding provider";
  write_json_file(out / "run_report.json", run_notes);

  // manifest: hashes of every artifact under out_dir except itself and run_state
  json outputs = json::object();
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(out))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    const auto rel = fs::relative(p, out).generic_string();
    if (rel == "manifest.json" || rel == "run_state.json") continue;
    outputs[rel] = sha256_file(p);
  }
  report.manifest = {{"config", config.to_json()}, {"inputs", input_hashes(config)}, {"outputs", outputs}};
  write_json_file(out / "manifest.json", report.manifest);
  report.llm_calls = llm ? llm->calls.load() : 0;
  report.embed_calls = embedder.calls.load();
  return report;
}

}  // namespace fitrank
