#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dret {

struct Document {
  std::string id;
  std::optional<std::string> title;
  std::string text;
  std::string source;
};

// Ordered document collection with total id lookup. Immutable once built.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::string name) : name_(std::move(name)) {}

  // Throws DataError on duplicate id or empty text/title.
  void add(Document doc);

  const std::vector<Document>& docs() const { return docs_; }
  const Document& by_id(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) > 0; }
  std::size_t size() const { return docs_.size(); }
  const std::string& name() const { return name_; }

 private:
  std::string name_;
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> index_;
};

// query-id -> doc-id -> relevance grade (>= 0)
struct Qrels {
  std::map<std::string, std::map<std::string, int>> judgments;
};

// Per query: (doc-id, score) sorted by score descending, ties by ascending
// doc-id. Invariants enforced on construction via add().
struct ScoredDoc {
  std::string doc_id;
  double score;
  bool operator==(const ScoredDoc&) const = default;
};

class RetrievalRun {
 public:
  // Throws DataError on duplicate query id, duplicate doc id within a query,
  // or an ordering violation.
  void add(const std::string& query_id, std::vector<ScoredDoc> ranking);

  const std::map<std::string, std::vector<ScoredDoc>>& rankings() const { return rankings_; }
  bool operator==(const RetrievalRun&) const = default;

 private:
  std::map<std::string, std::vector<ScoredDoc>> rankings_;
};

// JSONL corpus: one object per line, fields "_id", "text", optional "title",
// optional "source".
Corpus ingest_jsonl(const std::string& path);
void write_jsonl(const Corpus& corpus, const std::string& path);

// 3-column TSV: query-id<TAB>doc-id<TAB>grade
Qrels load_qrels(const std::string& path);
void write_qrels(const Qrels& qrels, const std::string& path);

// 6-column TREC run lines: query-id Q0 doc-id rank score run-tag
void write_run(const RetrievalRun& run, const std::string& path,
               const std::string& run_tag = "dret");
RetrievalRun read_run(const std::string& path);

}  // namespace dret
