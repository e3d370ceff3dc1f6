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

#include "fitrank/corpus.hpp"

#include <unordered_set>

namespace fitrank {

std::string_view to_string(DocKind kind) { return kind == DocKind::resume ? "resume" : "job"; }

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "train";
}

DocKind parse_doc_kind(std::string_view s) {
  if (s == "resume") return DocKind::resume;
  if (s == "job") return DocKind::job;
  throw ValidationError("unknown kind " + std::string(s));
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "valid") return Split::valid;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split " + std::string(s));
}

std::string flatten_document(const Document& doc) {
  std::string out;
  for (const auto& f : doc.fields) {
    out += "## ";
    out += f.name;
    out += '\n';
    out += f.value;
    out += '\n';
  }
  return out;
}

void LabelSet::add(Label label) {
  if (label.label != 0 && label.label != 1) {
    throw ValidationError("label must be 0 or 1 for pair (" + label.resume_id + ", " +
                          label.job_id + ")");
  }
  auto key = std::make_pair(label.resume_id, label.job_id);
  if (index_.contains(key)) {
    throw ValidationError("duplicate label (" + label.resume_id + ", " + label.job_id + ")");
  }
  const std::size_t pos = entries_.size();
  index_.emplace(std::move(key), pos);
  by_resume_[label.resume_id].push_back(pos);
  by_job_[label.job_id].push_back(pos);
  entries_.push_back(std::move(label));
}

std::optional<int> LabelSet::label_of(const DocId& resume_id, const DocId& job_id) const {
  auto it = index_.find({resume_id, job_id});
  if (it == index_.end()) return std::nullopt;
  return entries_[it->second].label;
}

bool LabelSet::is_positive(const DocId& resume_id, const DocId& job_id) const {
  return label_of(resume_id, job_id) == 1;
}

LabelSet LabelSet::filter(Split split) const {
  LabelSet out;
  for (const auto& e : entries_)
    if (e.split == split) out.add(e);
  return out;
}

namespace {

std::vector<DocId> partners(const std::unordered_map<DocId, std::vector<std::size_t>>& index,
                            const std::vector<Label>& entries, const DocId& id, int label,
                            bool want_job) {
  std::vector<DocId> out;
  auto it = index.find(id);
  if (it == index.end()) return out;
  for (std::size_t pos : it->second) {
    const auto& e = entries[pos];
    if (e.label == label) out.push_back(want_job ? e.job_id : e.resume_id);
  }
  return out;
}

}  // namespace

std::vector<DocId> LabelSet::positive_jobs(const DocId& resume_id) const {
  return partners(by_resume_, entries_, resume_id, 1, true);
}
std::vector<DocId> LabelSet::positive_resumes(const DocId& job_id) const {
  return partners(by_job_, entries_, job_id, 1, false);
}
std::vector<DocId> LabelSet::rejected_jobs(const DocId& resume_id) const {
  return partners(by_resume_, entries_, resume_id, 0, true);
}
std::vector<DocId> LabelSet::rejected_resumes(const DocId& job_id) const {
  return partners(by_job_, entries_, job_id, 0, false);
}

std::vector<std::pair<DocId, DocId>> LabelSet::positive_pairs() const {
  std::vector<std::pair<DocId, DocId>> out;
  for (const auto& e : entries_)
    if (e.label == 1) out.emplace_back(e.resume_id, e.job_id);
  return out;
}

void Corpus::validate() {
  by_id_.clear();
  for (std::size_t i = 0; i < documents.size(); ++i) {
    const auto& d = documents[i];
    if (d.id.empty()) throw ValidationError("empty document id");
    for (const auto& f : d.fields)
      if (f.name.empty()) throw ValidationError("empty field name in " + d.id);
    if (!by_id_.emplace(d.id, i).second) throw ValidationError("duplicate id " + d.id);
  }
  for (const auto& l : labels.entries()) {
    const Document* r = find(l.resume_id);
    if (r == nullptr || r->kind != DocKind::resume)
      throw ValidationError("unknown resume " + l.resume_id);
    const Document* j = find(l.job_id);
    if (j == nullptr || j->kind != DocKind::job) throw ValidationError("unknown job " + l.job_id);
  }
}

const Document* Corpus::find(const DocId& id) const {
  if (by_id_.size() != documents.size()) {
    // index is stale (documents edited after validate); fall back to a scan
    for (const auto& d : documents)
      if (d.id == id) return &d;
    return nullptr;
  }
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &documents[it->second];
}

const Document& Corpus::at(const DocId& id) const {
  const Document* d = find(id);
  if (d == nullptr) throw Error("unknown document " + id);
  return *d;
}

std::vector<DocId> Corpus::ids_of(DocKind kind) const {
  std::vector<DocId> out;
  for (const auto& d : documents)
    if (d.kind == kind) out.push_back(d.id);
  return out;
}

json document_to_json(const Document& doc) {
  json fields = json::array();
  for (const auto& f : doc.fields) fields.push_back(json::array({f.name, f.value}));
  return json{{"id", doc.id}, {"kind", to_string(doc.kind)}, {"fields", std::move(fields)}};
}

Document document_from_json(const json& j) {
  Document d;
  d.id = j.at("id").get<std::string>();
  d.kind = parse_doc_kind(j.at("kind").get<std::string>());
  for (const auto& f : j.at("fields")) {
    if (!f.is_array() || f.size() != 2) throw ValidationError("field must be [name, value]");
    d.fields.push_back({f[0].get<std::string>(), f[1].get<std::string>()});
  }
  return d;
}

json label_to_json(const Label& l) {
  return json{{"resume_id", l.resume_id},
              {"job_id", l.job_id},
              {"label", l.label},
              {"split", to_string(l.split)}};
}

Label label_from_json(const json& j) {
  Label l;
  l.resume_id = j.at("resume_id").get<std::string>();
  l.job_id = j.at("job_id").get<std::string>();
  l.label = j.at("label").get<int>();
  l.split = parse_split(j.at("split").get<std::string>());
  return l;
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
  std::vector<Document> docs;
  std::unordered_set<DocId> seen;
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    Document d = document_from_json(j);
    if (!seen.insert(d.id).second) throw ValidationError("duplicate id " + d.id);
    docs.push_back(std::move(d));
  });
  return docs;
}

LabelSet load_labels(const std::filesystem::path& path) {
  LabelSet labels;
  for_each_jsonl(path, [&](const json& j, std::size_t) { labels.add(label_from_json(j)); });
  return labels;
}

Corpus load_corpus(const std::filesystem::path& dir) {
  return load_corpus(dir / "documents.jsonl", dir / "labels.jsonl");
}

Corpus load_corpus(const std::filesystem::path& documents_path,
                   const std::filesystem::path& labels_path) {
  Corpus c;
  c.documents = load_documents(documents_path);
  if (std::filesystem::exists(labels_path)) c.labels = load_labels(labels_path);
  c.validate();
  return c;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  auto docs = open_for_write(dir / "documents.jsonl");
  for (const auto& d : corpus.documents) write_jsonl_line(docs, document_to_json(d));
  auto labels = open_for_write(dir / "labels.jsonl");
  for (const auto& l : corpus.labels.entries()) write_jsonl_line(labels, label_to_json(l));
}

}  // namespace fitrank
