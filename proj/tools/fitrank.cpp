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

// fitrank: command-line front end for the resume-job matching engine.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fitrank/augment.hpp"
#include "fitrank/corpus.hpp"
#include "fitrank/embedder.hpp"
#include "fitrank/evalreport.hpp"
#include "fitrank/jsonl.hpp"
#include "fitrank/miner.hpp"
#include "fitrank/pipeline.hpp"
#include "fitrank/synthetic.hpp"
#include "fitrank/trainer.hpp"

namespace fs = std::filesystem;
using namespace fitrank;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInvalid = 2;

Corpus load_corpus_from(const std::string& dir, const std::string& documents,
                        const std::string& labels) {
  if (!documents.empty()) {
    fs::path lp = labels;
    if (lp.empty()) lp = fs::path(documents).parent_path() / "labels.jsonl";
    return load_corpus(documents, lp);
  }
  if (dir.empty()) throw ValidationError("--corpus or --documents is required");
  return load_corpus(dir);
}

AdapterParams load_or_identity(const std::string& path, const EmbeddingStore& store,
                               double temperature) {
  if (path.empty()) return AdapterParams::identity(store.dim(), temperature);
  return load_adapter(path).adapter;
}

// Job-side ranking task from the labels of one split.
EvalTask task_for(const Corpus& corpus, TaskDirection direction, Split split, std::size_t k) {
  const auto pool =
      corpus.ids_of(direction == TaskDirection::rank_resume ? DocKind::resume : DocKind::job);
  return make_task(direction, corpus.labels.filter(split), pool, k);
}

struct CorpusArgs {
  std::string dir;
  std::string documents;
  std::string labels;

  void attach(CLI::App* app) {
    app->add_option("--corpus", dir, "Directory holding documents.jsonl and labels.jsonl");
    app->add_option("--documents", documents, "documents.jsonl path (overrides --corpus)");
    app->add_option("--labels", labels, "labels.jsonl path");
  }
  Corpus load() const { return load_corpus_from(dir, documents, labels); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fitrank: dense resume-job matching with hard-negative mining"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  app.add_option("--config", config_path, "Run configuration JSON");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--out", out, "Output path");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a corpus and write a normalized copy");
  CorpusArgs ingest_corpus;
  ingest_corpus.attach(ingest);
  ingest->callback([&] {
    Corpus c = ingest_corpus.load();
    if (!out.empty()) save_corpus(c, out);
    std::cout << "documents " << c.documents.size() << " (resumes "
              << c.ids_of(DocKind::resume).size() << ", jobs " << c.ids_of(DocKind::job).size()
              << "), labels " << c.labels.size() << "\n";
  });

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a planted synthetic corpus");
  SyntheticSpec spec;
  std::optional<double> threshold_quantile;
  synth->add_option("--n-resumes", spec.n_resumes);
  synth->add_option("--n-jobs", spec.n_jobs);
  synth->add_option("--latent-dim", spec.latent_dim);
  synth->add_option("--density", spec.label_density);
  synth->add_option("--threshold", spec.accept_threshold, "Latent cosine acceptance threshold");
  synth->add_option("--threshold-quantile", threshold_quantile,
                    "Set the threshold to this quantile of latent cosines");
  synth->add_option("--noise", spec.noise_sigma);
  synth->add_option("--embedding-dim", spec.embedding_dim);
  synth->callback([&] {
    if (out.empty()) throw ValidationError("--out is required");
    if (seed) spec.seed = *seed;
    if (threshold_quantile) spec.accept_threshold = latent_cosine_quantile(spec, *threshold_quantile);
    const auto s = generate_synthetic(spec);
    save_synthetic(s, spec, out);
    std::cout << "wrote " << s.corpus.documents.size() << " documents, " << s.corpus.labels.size()
              << " labels, " << s.ground_truth.positives() << " compatible pairs to " << out << "\n";
  });

  // augment
  auto* augment = app.add_subcommand("augment", "Generate hypothetical resumes for job posts");
  std::string aug_corpus, aug_jobs, aug_labels, aug_model = "echo", aug_url, aug_ledger;
  std::size_t shots = 1;
  double aug_temperature = 0.0;
  augment->add_option("--corpus", aug_corpus, "Directory holding documents.jsonl and labels.jsonl");
  augment->add_option("--jobs", aug_jobs, "documents.jsonl with the job posts (overrides --corpus)");
  augment->add_option("--labels", aug_labels, "labels.jsonl with accepted training pairs");
  augment->add_option("--shots", shots, "Few-shot example count");
  augment->add_option("--model", aug_model, "LLM model name (\"echo\" = offline mock)");
  augment->add_option("--llm-url", aug_url, "Chat-completions base URL");
  augment->add_option("--temperature", aug_temperature);
  augment->add_option("--ledger", aug_ledger, "Replay generations from this ledger");
  augment->callback([&] {
    if (out.empty()) throw ValidationError("--out is required");
    Corpus c = load_corpus_from(aug_corpus, aug_jobs, aug_labels);
    const auto job_ids = c.ids_of(DocKind::job);
    std::vector<AugmentedJob> jobs;
    if (!aug_ledger.empty()) {
      const auto ledger = read_augmentations(aug_ledger);
      for (const auto& id : job_ids) {
        const auto it = ledger.find(id);
        if (it == ledger.end()) throw ValidationError("no ledger entry for job " + id);
        jobs.push_back(it->second);
      }
    } else {
      std::unique_ptr<LlmClient> client;
      if (aug_url.empty())
        client = std::make_unique<EchoLlmClient>();
      else
        client = std::make_unique<HttpLlmClient>(aug_url, aug_model, aug_temperature);
      AugmentOptions opts;
      opts.n_shots = shots;
      opts.seed = seed.value_or(0);
      auto run = augment_jobs(c, job_ids, *client, opts);
      jobs = std::move(run.jobs);
      for (const auto& [r, j] : run.few_shot_pairs)
        std::cout << "few-shot pair " << r << " " << j << "\n";
    }
    write_augmentations(jobs, out);
    std::cout << "augmented " << jobs.size() << " jobs\n";
  });

  // embed
  auto* embed = app.add_subcommand("embed", "Embed documents into embeddings.jsonl");
  CorpusArgs embed_corpus;
  embed_corpus.attach(embed);
  std::string provider = "random-projection", emb_url, emb_model, emb_from, emb_aug, emb_cache;
  Index emb_dim = 64;
  embed->add_option("--provider", provider, "random-projection | file | http");
  embed->add_option("--dim", emb_dim, "Dimension of the random-projection mock");
  embed->add_option("--url", emb_url);
  embed->add_option("--model", emb_model);
  embed->add_option("--from", emb_from, "Pre-built embeddings for the file provider");
  embed->add_option("--augmentations", emb_aug, "Use combined job texts from this ledger");
  embed->add_option("--cache", emb_cache, "Embedding cache file (read and updated)");
  embed->callback([&] {
    if (out.empty()) throw ValidationError("--out is required");
    Corpus c = embed_corpus.load();
    RunConfig rc;
    rc.seed = seed.value_or(0);
    rc.embed_provider = provider;
    rc.embed_dim = emb_dim;
    rc.embed_url = emb_url;
    rc.embed_model = emb_model;
    rc.embeddings = emb_from;
    auto p = make_embedding_provider(rc);
    std::map<DocId, std::string> overrides;
    if (!emb_aug.empty())
      for (const auto& [id, a] : read_augmentations(emb_aug)) overrides[id] = a.combined_text;
    EmbeddingCache cache;
    if (!emb_cache.empty() && fs::exists(emb_cache)) cache.load(emb_cache);
    auto store = embed_documents(c.documents, *p, emb_aug.empty() ? nullptr : &overrides, &cache);
    if (!emb_cache.empty()) cache.save(emb_cache);
    save_embeddings(store, out);
    std::cout << "embedded " << store.size() << " documents (dim " << store.dim() << ")\n";
  });

  // mine
  auto* mine = app.add_subcommand("mine", "Mine hard negatives");
  CorpusArgs mine_corpus;
  mine_corpus.attach(mine);
  std::string strategy = "rum", direction = "job", mine_emb, mine_adapter, mine_aug;
  PercentileRange range;
  std::size_t n_per_anchor = 2, bm25_k = 10;
  bool global = false;
  mine->add_option("--strategy", strategy, "rum | bm25 | rejected | random");
  mine->add_option("--direction", direction, "Anchor kind: resume | job");
  mine->add_option("--lo", range.lo);
  mine->add_option("--hi", range.hi);
  mine->add_option("--n", n_per_anchor, "Negatives per anchor");
  mine->add_option("--k", bm25_k, "BM25 top-k");
  mine->add_option("--embeddings", mine_emb);
  mine->add_option("--adapter", mine_adapter, "Adapter scoring the candidates (default identity)");
  mine->add_option("--augmentations", mine_aug, "Combined job texts for BM25");
  mine->add_flag("--global", global, "Experimental: one band over all pairs");
  mine->callback([&] {
    if (out.empty()) throw ValidationError("--out is required");
    Corpus c = mine_corpus.load();
    const auto dir = parse_mining_direction(direction);
    const auto strat = parse_mining_strategy(strategy);
    const LabelSet train = c.labels.filter(Split::train);
    const bool resume_anchor = dir == MiningDirection::negatives_for_resume_anchor;
    std::vector<DocId> anchors;
    std::set<DocId> seen;
    for (const auto& [r, j] : train.positive_pairs()) {
      const DocId& a = resume_anchor ? r : j;
      if (seen.insert(a).second) anchors.push_back(a);
    }
    const auto candidates = c.ids_of(resume_anchor ? DocKind::job : DocKind::resume);
    const std::uint64_t s = seed.value_or(0);
    HardNegativeSet set;
    switch (strat) {
      case MiningStrategy::rum: {
        if (mine_emb.empty()) throw ValidationError("--embeddings is required for rum");
        const auto store = load_embeddings(mine_emb);
        const auto adapter = load_or_identity(mine_adapter, store, 0.05);
        const auto fn = embedding_score_fn(store, adapter);
        set = global ? rum_mine_global(anchors, candidates, fn, train, dir, range, n_per_anchor, s)
                     : rum_mine(anchors, candidates, fn, train, dir, range, n_per_anchor, s);
        break;
      }
      case MiningStrategy::bm25_topk: {
        std::map<DocId, std::string> texts;
        for (const auto& d : c.documents) texts[d.id] = flatten_document(d);
        if (!mine_aug.empty())
          for (const auto& [id, a] : read_augmentations(mine_aug)) texts[id] = a.combined_text;
        set = bm25_topk_mine(anchors, candidates, texts, bm25_k, train, dir);
        if (!set.short_anchors.empty())
          std::cerr << "warning: " << set.short_anchors.size()
                    << " anchors have fewer than k eligible candidates\n";
        break;
      }
      case MiningStrategy::rejected:
        set = rejected_mine(anchors, train, dir);
        break;
      case MiningStrategy::random:
        set = random_mine(anchors, candidates, train, dir, n_per_anchor, s);
        break;
    }
    write_negatives(set, out);
    std::cout << "mined " << set.total() << " negatives for " << set.negatives.size()
              << " anchors\n";
  });

  // train
  auto* train = app.add_subcommand("train", "Train the adapter");
  CorpusArgs train_corpus;
  train_corpus.attach(train);
  std::string train_emb, train_log, continue_from;
  std::vector<std::string> negatives_paths;
  std::optional<double> lr, temperature;
  std::optional<std::size_t> epochs, batch_size, l;
  train->add_option("--embeddings", train_emb)->required();
  train->add_option("--negatives", negatives_paths, "negatives.jsonl (one per direction)");
  train->add_option("--lr", lr);
  train->add_option("--epochs", epochs);
  train->add_option("--batch-size", batch_size);
  train->add_option("--hard-negatives", l, "Hard negatives per pair");
  train->add_option("--temperature", temperature);
  train->add_option("--log", train_log, "Per-step JSONL loss log");
  train->add_option("--continue", continue_from,
                    "Experimental: start from this adapter instead of identity");
  train->callback([&] {
    if (out.empty()) throw ValidationError("--out is required");
    TrainConfig tc;
    if (!config_path.empty()) {
      const json j = read_json_file(config_path);
      tc = TrainConfig::from_json(j.contains("train") ? j.at("train") : j);
    }
    if (seed) tc.seed = *seed;
    if (lr) tc.learning_rate = *lr;
    if (epochs) tc.epochs = *epochs;
    if (batch_size) tc.batch_size = *batch_size;
    if (l) tc.hard_negatives_per_pair = *l;
    if (temperature) tc.temperature = *temperature;

    Corpus c = train_corpus.load();
    const auto store = load_embeddings(train_emb);
    std::vector<HardNegativeSet> sets;
    for (const auto& p : negatives_paths) sets.push_back(read_negatives(p));
    HardNegatives hn;
    for (const auto& s : sets) {
      auto& slot = s.direction == MiningDirection::negatives_for_resume_anchor ? hn.for_resume
                                                                               : hn.for_job;
      if (slot) throw ValidationError("two negatives files for the same direction");
      slot = &s;
    }
    Validator validator;
    std::optional<EvalTask> valid;
    if (!c.labels.filter(Split::valid).positive_pairs().empty()) {
      valid = task_for(c, TaskDirection::rank_resume, Split::valid, 10);
      validator = [&](const AdapterParams& a) { return evaluate(*valid, a, store).macro_ndcg; };
    }
    std::optional<AdapterParams> init;
    if (!continue_from.empty()) init = load_adapter(continue_from).adapter;
    const auto positives = c.labels.filter(Split::train).positive_pairs();
    auto result = train_adapter(positives, store, hn, tc, validator, init ? &*init : nullptr);
    if (!train_log.empty()) write_train_log(result.log, train_log);
    AdapterCheckpoint ckpt{result.adapter, tc.to_json(), json::object()};
    std::string strat = "none";
    json rng = nullptr;
    if (!sets.empty()) {
      strat = std::string(to_string(sets.front().strategy));
      if (sets.front().range) rng = {sets.front().range->lo, sets.front().range->hi};
    }
    ckpt.provenance = {{"negatives_strategy", strat}, {"range", rng}, {"iteration", 1}};
    save_adapter(ckpt, out);
    std::cout << "trained " << result.log.size() << " steps";
    if (!result.validation.empty())
      std::cout << ", best validation nDCG@10 " << result.validation[result.best_epoch - 1]
                << " at epoch " << result.best_epoch;
    std::cout << "\n";
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate ranking quality");
  CorpusArgs eval_corpus;
  eval_corpus.attach(eval);
  std::string task = "rank_resume", eval_emb, eval_adapter, eval_split = "test";
  std::size_t k = 10;
  eval->add_option("--task", task, "rank_resume | rank_job");
  eval->add_option("--k", k);
  eval->add_option("--embeddings", eval_emb)->required();
  eval->add_option("--adapter", eval_adapter, "Adapter checkpoint (default identity)");
  eval->add_option("--split", eval_split);
  eval->callback([&] {
    Corpus c = eval_corpus.load();
    const auto store = load_embeddings(eval_emb);
    AdapterCheckpoint ckpt;
    if (eval_adapter.empty())
      ckpt.adapter = AdapterParams::identity(store.dim());
    else
      ckpt = load_adapter(eval_adapter);
    const auto t = task_for(c, parse_task_direction(task), parse_split(eval_split), k);
    auto r = evaluate(t, ckpt.adapter, store);
    r.adapter_provenance = ckpt.provenance;
    if (!out.empty()) write_report(r, out);
    std::cout << format_metrics_table({r});
  });

  // bias
  auto* bias = app.add_subcommand("bias", "Group shares in the top-N ranked resumes");
  CorpusArgs bias_corpus;
  bias_corpus.attach(bias);
  std::string attribute = "gender", attributes_path, bias_emb, bias_adapter, bias_split = "test";
  std::size_t top_n = 10;
  bias->add_option("--attribute", attribute);
  bias->add_option("--attributes", attributes_path, "attributes.jsonl")->required();
  bias->add_option("--embeddings", bias_emb)->required();
  bias->add_option("--adapter", bias_adapter);
  bias->add_option("--top-n", top_n);
  bias->add_option("--split", bias_split);
  bias->callback([&] {
    Corpus c = bias_corpus.load();
    const auto store = load_embeddings(bias_emb);
    const auto adapter = load_or_identity(bias_adapter, store, 0.05);
    const auto t = task_for(c, TaskDirection::rank_resume, parse_split(bias_split), top_n);
    const auto r = evaluate(t, adapter, store);
    const auto attrs = load_attributes(attributes_path, attribute);
    const auto b = bias_report(r.rankings, attrs, attribute, c.ids_of(DocKind::resume), top_n);
    if (!out.empty()) write_json_file(out, bias_to_json(b));
    std::cout << format_bias_table({{bias_adapter.empty() ? "identity" : "adapter", b}});
  });

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "Run augment, embed, train, mine, eval end to end");
  std::optional<int> iterations;
  std::string pipe_corpus, pipe_attributes;
  bool continue_training = false;
  pipeline->add_option("--iterations", iterations, "Training rounds (1 = bootstrap only)");
  pipeline->add_option("--corpus", pipe_corpus);
  pipeline->add_option("--attributes", pipe_attributes);
  pipeline->add_flag("--continue", continue_training,
                     "Experimental: later rounds start from the previous adapter");
  pipeline->callback([&] {
    RunConfig rc;
    if (!config_path.empty()) rc = load_run_config(config_path);
    if (seed) rc.seed = *seed;
    if (!out.empty()) rc.out_dir = out;
    if (iterations) rc.iterations = *iterations;
    if (!pipe_corpus.empty()) rc.corpus_dir = pipe_corpus;
    if (!pipe_attributes.empty()) rc.attributes = pipe_attributes;
    if (continue_training) rc.continue_training = true;
    const auto diagnostics = validate_config(rc);
    if (!diagnostics.empty()) {
      for (const auto& d : diagnostics) std::cerr << "config: " << d << "\n";
      throw ValidationError("invalid config");
    }
    const auto report = run_pipeline(rc);
    std::cout << format_metrics_table(report.reports);
    if (report.bias) std::cout << format_bias_table({{"adapter", *report.bias}});
    std::cout << "llm calls " << report.llm_calls << ", embedding calls " << report.embed_calls
              << ", artifacts in " << rc.out_dir.string() << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
