#include "dret/mining.hpp"

#include <cstring>
#include <fstream>
#include <iostream>

#include "dret/errors.hpp"
#include "dret/io.hpp"
#include "dret/rng.hpp"

namespace dret {

void EmbeddingTable::add(const std::string& id, const Eigen::VectorXd& vec) {
  if (dim == 0) dim = static_cast<int>(vec.size());
  if (vec.size() != dim) throw DataError("embedding dimension mismatch for id '" + id + "'");
  if (index.count(id)) throw DataError("duplicate embedding id '" + id + "'");
  index.emplace(id, ids.size());
  ids.push_back(id);
  vectors.push_back(vec);
}

const Eigen::VectorXd& EmbeddingTable::at(const std::string& id) const {
  auto it = index.find(id);
  if (it == index.end()) throw DataError("no precomputed embedding for '" + id + "'");
  return vectors[it->second];
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("embedding file truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  atomic_write(path, [&](std::ostream& out) {
    put_u32(out, static_cast<std::uint32_t>(table.dim));
    put_u32(out, static_cast<std::uint32_t>(table.ids.size()));
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
      put_u32(out, static_cast<std::uint32_t>(table.ids[i].size()));
      out.write(table.ids[i].data(), static_cast<std::streamsize>(table.ids[i].size()));
      for (int d = 0; d < table.dim; ++d) {
        const float f = static_cast<float>(table.vectors[i](d));
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
      }
    }
  });
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file: " + path);
  EmbeddingTable table;
  table.dim = static_cast<int>(get_u32(in));
  const std::uint32_t count = get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(in);
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) throw DataError("embedding file truncated");
    Eigen::VectorXd vec(table.dim);
    for (int d = 0; d < table.dim; ++d) {
      const std::uint32_t bits = get_u32(in);
      float f;
      std::memcpy(&f, &bits, 4);
      vec(d) = static_cast<double>(f);
    }
    table.add(id, vec);
  }
  in.peek();
  if (!in.eof()) throw DataError("trailing bytes in embedding file: " + path);
  return table;
}

FlatIndex index_from_embedder(const Corpus& corpus, const Embedder& embedder) {
  if (corpus.size() == 0) throw DataError("cannot index an empty corpus");
  FlatIndex index;
  index.similarity = embedder.similarity();
  for (const auto& doc : corpus.docs()) index.ids.push_back(doc.id);
  const Embedding first = embedder.embed_doc(corpus.docs()[0]);
  index.matrix.resize(corpus.size(), first.size());
  index.matrix.row(0) = first.transpose();
  for (std::size_t i = 1; i < corpus.size(); ++i)
    index.matrix.row(i) = embedder.embed_doc(corpus.docs()[i]).transpose();
  return index;
}

std::vector<TrainingTriple> mine_hard_negatives(const std::vector<TrainingTriple>& triples,
                                                const Corpus& corpus, const Embedder& embedder,
                                                std::size_t k, std::size_t per_query,
                                                std::uint64_t seed) {
  if (corpus.size() <= per_query)
    throw DataError("corpus too small to mine " + std::to_string(per_query) +
                    " negatives per query");
  if (corpus.size() < k)
    std::cerr << "warning: corpus has " << corpus.size() << " documents, fewer than k=" << k
              << "; using all of them as the candidate pool\n";
  const FlatIndex index = index_from_embedder(corpus, embedder);
  Rng rng(seed);
  std::vector<TrainingTriple> mined;
  mined.reserve(triples.size());
  for (std::size_t t = 0; t < triples.size(); ++t) {
    TrainingTriple triple = triples[t];
    const Embedding q = embedder.embed_query(triple.pair.query);
    const auto top = search(index, q, k);
    std::vector<const std::string*> candidates;
    for (const auto& sd : top) {
      const std::string& text = corpus.by_id(sd.doc_id).text;
      if (text != triple.pair.positive) candidates.push_back(&text);
    }
    if (candidates.empty())
      throw DataError("triple " + std::to_string(t) +
                      ": every retrieved candidate equals the positive passage");
    for (std::size_t i = 0; i < per_query; ++i)
      triple.hard_negatives.push_back(*candidates[rng.below(candidates.size())]);
    mined.push_back(std::move(triple));
  }
  return mined;
}

FilterResult consistency_filter(const std::vector<TrainingPair>& pairs,
                                const Corpus& corpus_of_positives, const Embedder& embedder,
                                std::size_t top) {
  // Positives are matched to corpus documents by exact text identity.
  std::unordered_map<std::string, std::vector<std::string>> ids_by_text;
  for (const auto& doc : corpus_of_positives.docs()) ids_by_text[doc.text].push_back(doc.id);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (!ids_by_text.count(pairs[i].positive))
      throw DataError("pair " + std::to_string(i) + " (query '" + pairs[i].query +
                      "'): positive passage not present in the corpus");
  const FlatIndex index = index_from_embedder(corpus_of_positives, embedder);
  FilterResult result;
  for (const auto& pair : pairs) {
    const Embedding q = embedder.embed_query(pair.query);
    const auto ranked = search(index, q, top);
    const auto& positive_ids = ids_by_text.at(pair.positive);
    bool hit = false;
    for (const auto& sd : ranked)
      for (const auto& pid : positive_ids)
        if (sd.doc_id == pid) hit = true;
    (hit ? result.retained : result.dropped).push_back(pair);
  }
  return result;
}

}  // namespace dret
