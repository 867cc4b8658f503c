#include "dret/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <iomanip>
#include <sstream>

#include "dret/errors.hpp"
#include "dret/io.hpp"
#include "json.hpp"

namespace dret {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Shortest decimal that round-trips a double through istream extraction.
std::string format_score(double score) {
  std::ostringstream ss;
  ss << std::setprecision(17) << score;
  return ss.str();
}

}  // namespace

void Corpus::add(Document doc) {
  if (trim(doc.text).empty()) throw DataError("document '" + doc.id + "' has empty text");
  if (doc.title && trim(*doc.title).empty())
    throw DataError("document '" + doc.id + "' has an empty title");
  if (index_.count(doc.id)) throw DataError("duplicate document id '" + doc.id + "'");
  index_.emplace(doc.id, docs_.size());
  docs_.push_back(std::move(doc));
}

const Document& Corpus::by_id(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("unknown document id '" + id + "'");
  return docs_[it->second];
}

void RetrievalRun::add(const std::string& query_id, std::vector<ScoredDoc> ranking) {
  if (rankings_.count(query_id)) throw DataError("duplicate query id '" + query_id + "' in run");
  std::set<std::string> seen;
  for (const auto& scored : ranking)
    if (!seen.insert(scored.doc_id).second)
      throw DataError("duplicate doc id '" + scored.doc_id + "' in run for query '" + query_id +
                      "'");
  for (std::size_t i = 1; i < ranking.size(); ++i) {
    const auto& prev = ranking[i - 1];
    const auto& cur = ranking[i];
    if (cur.score > prev.score)
      throw DataError("run for query '" + query_id + "' not sorted by score");
    if (cur.score == prev.score && cur.doc_id <= prev.doc_id)
      throw DataError("run for query '" + query_id + "' violates doc-id tie order at '" +
                      cur.doc_id + "'");
  }
  rankings_.emplace(query_id, std::move(ranking));
}

Corpus ingest_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  Corpus corpus(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object() || !obj.contains("_id") || !obj["_id"].is_string())
      throw DataError(path + ":" + std::to_string(lineno) + ": missing string field \"_id\"");
    if (!obj.contains("text") || !obj["text"].is_string())
      throw DataError(path + ":" + std::to_string(lineno) + ": missing string field \"text\"");
    Document doc;
    doc.id = obj["_id"].get<std::string>();
    doc.text = obj["text"].get<std::string>();
    if (obj.contains("title") && !obj["title"].is_null()) {
      if (!obj["title"].is_string())
        throw DataError(path + ":" + std::to_string(lineno) + ": \"title\" must be a string");
      doc.title = obj["title"].get<std::string>();
    }
    if (obj.contains("source") && obj["source"].is_string())
      doc.source = obj["source"].get<std::string>();
    try {
      corpus.add(std::move(doc));
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

void write_jsonl(const Corpus& corpus, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& doc : corpus.docs()) {
      nlohmann::json obj;
      obj["_id"] = doc.id;
      if (doc.title) obj["title"] = *doc.title;
      obj["text"] = doc.text;
      if (!doc.source.empty()) obj["source"] = doc.source;
      out << obj.dump() << "\n";
    }
  });
}

Qrels load_qrels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open qrels file: " + path);
  Qrels qrels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    std::string qid, did, grade_str;
    if (!std::getline(ss, qid, '\t') || !std::getline(ss, did, '\t') ||
        !std::getline(ss, grade_str))
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 tab-separated columns");
    grade_str = trim(grade_str);
    int grade = 0;
    std::size_t consumed = 0;
    try {
      grade = std::stoi(grade_str, &consumed);
    } catch (const std::exception&) {
      consumed = std::string::npos;
    }
    if (consumed != grade_str.size() || grade_str.empty())
      throw DataError(path + ":" + std::to_string(lineno) + ": non-integer grade '" + grade_str +
                      "'");
    if (grade < 0)
      throw DataError(path + ":" + std::to_string(lineno) + ": negative grade " + grade_str);
    auto& per_query = qrels.judgments[qid];
    if (per_query.count(did))
      throw DataError(path + ":" + std::to_string(lineno) + ": duplicate judgment for (" + qid +
                      ", " + did + ")");
    per_query[did] = grade;
  }
  return qrels;
}

void write_qrels(const Qrels& qrels, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& [qid, per_query] : qrels.judgments)
      for (const auto& [did, grade] : per_query) out << qid << "\t" << did << "\t" << grade << "\n";
  });
}

void write_run(const RetrievalRun& run, const std::string& path, const std::string& run_tag) {
  atomic_write(path, [&](std::ostream& out) {
    for (const auto& [qid, ranking] : run.rankings()) {
      std::size_t rank = 1;
      for (const auto& sd : ranking)
        out << qid << " Q0 " << sd.doc_id << " " << rank++ << " " << format_score(sd.score) << " "
            << run_tag << "\n";
    }
  });
}

RetrievalRun read_run(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open run file: " + path);
  std::map<std::string, std::vector<ScoredDoc>> per_query;
  std::map<std::string, std::size_t> expected_rank;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    std::string qid, q0, did, tag;
    std::size_t rank = 0;
    double score = 0.0;
    if (!(ss >> qid >> q0 >> did >> rank >> score >> tag))
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 6 columns");
    if (rank != ++expected_rank[qid])
      throw DataError(path + ":" + std::to_string(lineno) + ": rank " + std::to_string(rank) +
                      " out of sequence for query '" + qid + "'");
    per_query[qid].push_back({did, score});
  }
  RetrievalRun run;
  for (auto& [qid, ranking] : per_query) {
    try {
      run.add(qid, std::move(ranking));
    } catch (const DataError& e) {
      throw DataError(path + ": " + e.what());
    }
  }
  return run;
}

}  // namespace dret
