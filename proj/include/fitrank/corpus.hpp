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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fitrank/common.hpp"
#include "fitrank/jsonl.hpp"

namespace fitrank {

enum class DocKind { resume, job };
enum class Split { train, valid, test };

std::string_view to_string(DocKind kind);
std::string_view to_string(Split split);
DocKind parse_doc_kind(std::string_view s);
Split parse_split(std::string_view s);

struct Field {
  std::string name;
  std::string value;

  bool operator==(const Field&) const = default;
};

/// A resume or job post: an ordered list of named text fields.
struct Document {
  DocId id;
  DocKind kind = DocKind::resume;
  std::vector<Field> fields;

  bool operator==(const Document&) const = default;
};

/// Renders fields in order as "## <name>\n<value>\n". Values are copied
/// verbatim; an empty field list yields "".
std::string flatten_document(const Document& doc);

struct Label {
  DocId resume_id;
  DocId job_id;
  int label = 0;
  Split split = Split::train;

  bool operator==(const Label&) const = default;
};

/// Binary resume-job labels with split assignment. At most one entry per
/// (resume_id, job_id).
class LabelSet {
 public:
  /// Throws ValidationError on a duplicate pair or a non-binary label.
  void add(Label label);

  const std::vector<Label>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::optional<int> label_of(const DocId& resume_id, const DocId& job_id) const;
  bool is_positive(const DocId& resume_id, const DocId& job_id) const;

  /// Entries in the given split, in insertion order.
  LabelSet filter(Split split) const;

  /// Label-1 jobs of a resume / label-1 resumes of a job, in insertion order.
  std::vector<DocId> positive_jobs(const DocId& resume_id) const;
  std::vector<DocId> positive_resumes(const DocId& job_id) const;
  std::vector<DocId> rejected_jobs(const DocId& resume_id) const;
  std::vector<DocId> rejected_resumes(const DocId& job_id) const;

  /// All label-1 pairs as (resume_id, job_id), in insertion order.
  std::vector<std::pair<DocId, DocId>> positive_pairs() const;

  bool operator==(const LabelSet& other) const { return entries_ == other.entries_; }

 private:
  std::vector<Label> entries_;
  std::map<std::pair<DocId, DocId>, std::size_t> index_;
  std::unordered_map<DocId, std::vector<std::size_t>> by_resume_;
  std::unordered_map<DocId, std::vector<std::size_t>> by_job_;
};

struct Corpus {
  std::vector<Document> documents;
  LabelSet labels;

  /// Rebuilds the id index and checks every corpus invariant.
  void validate();
  const Document* find(const DocId& id) const;
  const Document& at(const DocId& id) const;
  std::vector<DocId> ids_of(DocKind kind) const;

 private:
  std::unordered_map<DocId, std::size_t> by_id_;
};

json document_to_json(const Document& doc);
Document document_from_json(const json& j);
json label_to_json(const Label& label);
Label label_from_json(const json& j);

std::vector<Document> load_documents(const std::filesystem::path& path);
LabelSet load_labels(const std::filesystem::path& path);

/// Loads `<dir>/documents.jsonl` and `<dir>/labels.jsonl` (labels optional).
Corpus load_corpus(const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& documents_path,
                   const std::filesystem::path& labels_path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace fitrank
