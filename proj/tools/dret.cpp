#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "dret/corpus.hpp"
#include "dret/encoder.hpp"
#include "dret/errors.hpp"
#include "dret/evalmetrics.hpp"
#include "dret/io.hpp"
#include "dret/mining.hpp"
#include "dret/objective.hpp"
#include "dret/pairgen.hpp"
#include "dret/retrieval.hpp"
#include "dret/synth.hpp"
#include "dret/trainer.hpp"
#include "json.hpp"

namespace {

using namespace dret;

std::vector<QueryItem> load_queries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open queries file: " + path);
  std::vector<QueryItem> queries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
    QueryItem q;
    try {
      q.id = obj.at("_id").get<std::string>();
      q.text = obj.at("text").get<std::string>();
      if (obj.contains("instruction")) q.instruction_template = obj["instruction"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

std::vector<StsPair> load_sts_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sentence-pair file: " + path);
  std::vector<StsPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      pairs.push_back({obj.at("sentence_a").get<std::string>(),
                       obj.at("sentence_b").get<std::string>(), obj.at("score").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return pairs;
}

FlatIndex index_from_file(const std::string& path, Similarity similarity) {
  const EmbeddingTable table = load_embeddings(path);
  FlatIndex index;
  index.similarity = similarity;
  index.ids = table.ids;
  index.matrix.resize(table.ids.size(), table.dim);
  for (std::size_t i = 0; i < table.ids.size(); ++i)
    index.matrix.row(i) = table.vectors[i].transpose();
  return index;
}

Similarity parse_similarity(const std::string& s) {
  if (s == "dot") return Similarity::dot;
  if (s == "cosine") return Similarity::cosine;
  throw UsageError("similarity must be dot or cosine, got '" + s + "'");
}

std::unique_ptr<ChatClient> make_client(bool stub, std::uint64_t seed, const std::string& endpoint,
                                        const std::string& model) {
  if (stub) return std::make_unique<StubChatClient>(seed);
  if (endpoint.empty()) throw UsageError("--endpoint is required unless --stub is given");
  return std::make_unique<HttpChatClient>(endpoint, model);
}

struct HistogramSummary {
  std::vector<int> bins = std::vector<int>(20, 0);  // cosine range [-1, 1]
  double sum = 0.0;
  double min = 1.0;
  double max = -1.0;
  int count = 0;

  void add(double v) {
    int bin = static_cast<int>((v + 1.0) / 2.0 * 20.0);
    bin = std::clamp(bin, 0, 19);
    ++bins[bin];
    sum += v;
    min = std::min(min, v);
    max = std::max(max, v);
    ++count;
  }

  nlohmann::json to_json() const {
    return {{"count", count},
            {"mean", count ? sum / count : 0.0},
            {"min", count ? min : 0.0},
            {"max", count ? max : 0.0},
            {"bins", bins},
            {"bin_edges", "20 uniform bins over [-1, 1]"}};
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Two-stage dense-retrieval trainer, miner, and evaluator"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Global worker-thread cap")->check(CLI::PositiveNumber);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate and persist a JSONL corpus");
  std::string ingest_corpus, ingest_out;
  ingest->add_option("--corpus", ingest_corpus, "Input corpus JSONL")->required();
  ingest->add_option("--out", ingest_out, "Validated corpus store")->required();

  // make-pairs
  auto* make_pairs = app.add_subcommand("make-pairs", "Build silver pre-training pairs");
  std::string mp_strategy, mp_corpus, mp_out;
  std::uint64_t mp_seed = 0;
  std::size_t mp_min_len = 32, mp_max_len = 128;
  make_pairs->add_option("--strategy", mp_strategy, "title-abstract or crop")
      ->required()
      ->check(CLI::IsMember({"title-abstract", "crop"}));
  make_pairs->add_option("--corpus", mp_corpus)->required();
  make_pairs->add_option("--seed", mp_seed);
  make_pairs->add_option("--min-len", mp_min_len, "Crop span minimum (tokens)");
  make_pairs->add_option("--max-len", mp_max_len, "Crop span maximum (tokens)");
  make_pairs->add_option("--out", mp_out)->required();

  // convert
  auto* convert = app.add_subcommand("convert", "Convert labeled task records to triples");
  std::string cv_task, cv_in, cv_out, cv_instruction;
  convert->add_option("--task", cv_task)->required()->check(CLI::IsMember({"nli", "qa", "dialogue"}));
  convert->add_option("--in", cv_in)->required();
  convert->add_option("--out", cv_out)->required();
  convert->add_option("--instruction", cv_instruction, "Query instruction override");

  // pretrain / finetune share encoder flags
  auto* pretrain = app.add_subcommand("pretrain", "Contrastive pre-training on silver pairs");
  auto* finetune = app.add_subcommand("finetune", "Instruction fine-tuning on triples");
  std::string pt_config, pt_pairs, pt_out, pt_init;
  int pt_d_model = 64, pt_layers = 2, pt_heads = 2, pt_seq = 128;
  pretrain->add_option("--config", pt_config)->required();
  pretrain->add_option("--pairs", pt_pairs)->required();
  pretrain->add_option("--out", pt_out)->required();
  pretrain->add_option("--init", pt_init, "Optional starting checkpoint");
  pretrain->add_option("--d-model", pt_d_model);
  pretrain->add_option("--n-layers", pt_layers);
  pretrain->add_option("--n-heads", pt_heads);
  pretrain->add_option("--max-seq-len", pt_seq);
  std::string ft_config, ft_triples, ft_init, ft_out;
  finetune->add_option("--config", ft_config)->required();
  finetune->add_option("--triples", ft_triples)->required();
  finetune->add_option("--init", ft_init)->required();
  finetune->add_option("--out", ft_out)->required();

  // mine
  auto* mine = app.add_subcommand("mine", "Mine hard negatives for triples");
  std::string mn_triples, mn_corpus, mn_ckpt, mn_embeddings, mn_out;
  std::size_t mn_k = 100, mn_per_query = 1;
  std::uint64_t mn_seed = 0;
  mine->add_option("--triples", mn_triples)->required();
  mine->add_option("--corpus", mn_corpus)->required();
  mine->add_option("--ckpt", mn_ckpt, "Mine with this checkpoint");
  mine->add_option("--embeddings", mn_embeddings, "Mine with precomputed embeddings");
  mine->add_option("--k", mn_k);
  mine->add_option("--per-query", mn_per_query);
  mine->add_option("--seed", mn_seed);
  mine->add_option("--out", mn_out)->required();

  // filter
  auto* filter = app.add_subcommand("filter", "Round-trip consistency filtering of pairs");
  std::string fl_pairs, fl_ckpt, fl_corpus, fl_out, fl_dropped;
  std::size_t fl_top = 3;
  filter->add_option("--pairs", fl_pairs)->required();
  filter->add_option("--ckpt", fl_ckpt)->required();
  filter->add_option("--corpus", fl_corpus, "Positives corpus; defaults to the pairs' positives");
  filter->add_option("--top", fl_top);
  filter->add_option("--out", fl_out)->required();
  filter->add_option("--dropped", fl_dropped)->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Synthetic data generation via a chat endpoint");
  synth->require_subcommand(1);
  std::string sy_endpoint, sy_model = "gpt-4-turbo-1106", sy_out, sy_corpus, sy_domain = "pubmed";
  std::size_t sy_count = 20;
  std::uint64_t sy_seed = 0;
  bool sy_stub = false;
  int sy_retries = 3;
  auto add_synth_common = [&](CLI::App* sub) {
    sub->add_option("--endpoint", sy_endpoint, "Chat-completions URL");
    sub->add_option("--model", sy_model);
    sub->add_option("--count", sy_count);
    sub->add_option("--seed", sy_seed);
    sub->add_option("--retries", sy_retries);
    sub->add_flag("--stub", sy_stub, "Use the deterministic offline stub client");
    sub->add_option("--out", sy_out)->required();
  };
  auto* synth_tasks = synth->add_subcommand("tasks", "Task-level scenario generation");
  add_synth_common(synth_tasks);
  auto* synth_examples = synth->add_subcommand("examples", "Task-level example generation");
  add_synth_common(synth_examples);
  std::string se_tasks_file;
  synth_examples->add_option("--tasks", se_tasks_file, "Task list JSONL (default: generate)");
  auto* synth_queries = synth->add_subcommand("queries", "Instance-level query generation");
  add_synth_common(synth_queries);
  synth_queries->add_option("--corpus", sy_corpus, "Passage source corpus")->required();
  synth_queries->add_option("--domain", sy_domain)->check(CLI::IsMember({"pubmed", "covid"}));

  // index
  auto* index_cmd = app.add_subcommand("index", "Encode a corpus into an embedding file");
  std::string ix_corpus, ix_ckpt, ix_out, ix_similarity = "dot";
  index_cmd->add_option("--corpus", ix_corpus)->required();
  index_cmd->add_option("--ckpt", ix_ckpt)->required();
  index_cmd->add_option("--similarity", ix_similarity)->check(CLI::IsMember({"dot", "cosine"}));
  index_cmd->add_option("--out", ix_out)->required();

  // search
  auto* search_cmd = app.add_subcommand("search", "Exact top-k search over an embedding file");
  std::string sr_index, sr_ckpt, sr_queries, sr_out, sr_similarity = "dot", sr_tag = "dret";
  std::size_t sr_k = 10;
  search_cmd->add_option("--index", sr_index)->required();
  search_cmd->add_option("--ckpt", sr_ckpt, "Checkpoint used to encode queries")->required();
  search_cmd->add_option("--queries", sr_queries)->required();
  search_cmd->add_option("--k", sr_k);
  search_cmd->add_option("--similarity", sr_similarity)->check(CLI::IsMember({"dot", "cosine"}));
  search_cmd->add_option("--run-tag", sr_tag);
  search_cmd->add_option("--out", sr_out)->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score a run file against qrels");
  std::string ev_run, ev_qrels, ev_metrics = "ndcg@10,recall@5,recall@20,ndcg@20,mrr@5,map";
  std::string ev_out, ev_gain = "exponential";
  eval_cmd->add_option("--run", ev_run)->required();
  eval_cmd->add_option("--qrels", ev_qrels)->required();
  eval_cmd->add_option("--metrics", ev_metrics);
  eval_cmd->add_option("--gain", ev_gain)->check(CLI::IsMember({"exponential", "linear"}));
  eval_cmd->add_option("--out", ev_out)->required();

  // sts-eval
  auto* sts_cmd = app.add_subcommand("sts-eval", "Spearman of cosine similarity vs gold scores");
  std::string st_pairs, st_ckpt, st_out, st_instruction = kStsInstructionTemplate;
  sts_cmd->add_option("--pairs", st_pairs)->required();
  sts_cmd->add_option("--ckpt", st_ckpt)->required();
  sts_cmd->add_option("--instruction", st_instruction);
  sts_cmd->add_option("--out", st_out)->required();

  // simdist
  auto* simdist = app.add_subcommand("simdist",
                                     "Cosine-similarity distributions of positives vs negatives");
  std::string sd_ckpt, sd_pairs, sd_out;
  simdist->add_option("--ckpt", sd_ckpt)->required();
  simdist->add_option("--pairs", sd_pairs, "Triples JSONL with hard negatives")->required();
  simdist->add_option("--out", sd_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (ingest->parsed()) {
    const Corpus corpus = ingest_jsonl(ingest_corpus);
    write_jsonl(corpus, ingest_out);
    std::cout << "ingested " << corpus.size() << " documents -> " << ingest_out << "\n";
    return 0;
  }

  if (make_pairs->parsed()) {
    const Corpus corpus = ingest_jsonl(mp_corpus);
    std::vector<TrainingPair> pairs =
        mp_strategy == "title-abstract" ? title_abstract_pairs(corpus)
                                        : crop_pairs(corpus, mp_seed, mp_min_len, mp_max_len);
    attach_instructions(pairs, kPretrainQueryInstructionTemplate);
    save_triples(triples_of(pairs), mp_out);
    std::cout << "wrote " << pairs.size() << " pairs -> " << mp_out << "\n";
    return 0;
  }

  if (convert->parsed()) {
    std::ifstream in(cv_in);
    if (!in) throw DataError("cannot open input file: " + cv_in);
    std::vector<SimilarityRecord> nli;
    std::vector<QaRecord> qa;
    std::vector<DialogueRecord> dialogue;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      try {
        const auto obj = nlohmann::json::parse(line);
        if (cv_task == "nli") {
          const std::string label = obj.at("label").get<std::string>();
          SimilarityLabel sl;
          if (label == "entail" || label == "similar") sl = SimilarityLabel::entail;
          else if (label == "contradict" || label == "nonsimilar") sl = SimilarityLabel::contradict;
          else if (label == "neutral") sl = SimilarityLabel::neutral;
          else throw DataError("unknown label '" + label + "'");
          nli.push_back({obj.at("sentence_a").get<std::string>(),
                         obj.at("sentence_b").get<std::string>(), sl});
        } else if (cv_task == "qa") {
          qa.push_back({obj.at("question").get<std::string>(), obj.at("passage").get<std::string>()});
        } else {
          dialogue.push_back({obj.at("query").get<std::string>(), obj.at("answer").get<std::string>()});
        }
      } catch (const nlohmann::json::exception& e) {
        throw DataError(cv_in + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    std::vector<TrainingTriple> triples;
    std::string instruction = cv_instruction;
    if (cv_task == "nli") {
      triples = convert_similarity_records(nli);
      if (instruction.empty()) instruction = "Given a sentence, retrieve sentences with the same meaning";
    } else if (cv_task == "qa") {
      triples = convert_qa_records(qa);
      if (instruction.empty())
        instruction = "Given a question, retrieve relevant documents that answer the question";
    } else {
      triples = convert_dialogue_records(dialogue);
      if (instruction.empty())
        instruction = "Given a question with context from online medical forums, retrieve "
                      "responses that best answer the question";
    }
    attach_instructions(triples, instruction);
    save_triples(triples, cv_out);
    std::cout << "wrote " << triples.size() << " triples -> " << cv_out << "\n";
    return 0;
  }

  if (pretrain->parsed()) {
    TrainConfig config = parse_train_config(pt_config);
    config.stage = TrainStage::pretrain;
    const auto triples = load_triples(pt_pairs);
    const auto pairs = pairs_of(triples);
    EncoderParams init;
    if (!pt_init.empty()) {
      init = load_checkpoint(pt_init);
    } else {
      EncoderConfig enc_config;
      enc_config.d_model = pt_d_model;
      enc_config.n_layers = pt_layers;
      enc_config.n_heads = pt_heads;
      enc_config.max_seq_len = pt_seq;
      enc_config.seed = config.seed;
      init = init_params(enc_config);
    }
    config.checkpoint_path = pt_out;
    const EncoderParams trained = run_pretrain(config, pairs, init);
    save_checkpoint(trained, pt_out);
    std::cout << "pre-trained on " << pairs.size() << " pairs -> " << pt_out << "\n";
    return 0;
  }

  if (finetune->parsed()) {
    TrainConfig config = parse_train_config(ft_config);
    config.stage = TrainStage::finetune;
    const auto triples = load_triples(ft_triples);
    const EncoderParams init = load_checkpoint(ft_init);
    config.checkpoint_path = ft_out;
    const EncoderParams trained = run_finetune(config, triples, init);
    save_checkpoint(trained, ft_out);
    std::cout << "fine-tuned on " << triples.size() << " triples -> " << ft_out << "\n";
    return 0;
  }

  if (mine->parsed()) {
    const auto triples = load_triples(mn_triples);
    const Corpus corpus = ingest_jsonl(mn_corpus);
    std::unique_ptr<Embedder> embedder;
    EncoderParams params;
    if (!mn_ckpt.empty()) {
      params = load_checkpoint(mn_ckpt);
      embedder = std::make_unique<EncoderEmbedder>(params);
    } else if (!mn_embeddings.empty()) {
      embedder = std::make_unique<PrecomputedEmbedder>(load_embeddings(mn_embeddings));
    } else {
      throw UsageError("mine requires --ckpt or --embeddings");
    }
    const auto mined = mine_hard_negatives(triples, corpus, *embedder, mn_k, mn_per_query, mn_seed);
    save_triples(mined, mn_out);
    std::cout << "mined negatives for " << mined.size() << " triples -> " << mn_out << "\n";
    return 0;
  }

  if (filter->parsed()) {
    const auto triples = load_triples(fl_pairs);
    const auto pairs = pairs_of(triples);
    Corpus positives;
    if (!fl_corpus.empty()) {
      positives = ingest_jsonl(fl_corpus);
    } else {
      positives = Corpus("positives");
      std::size_t i = 0;
      for (const auto& pair : pairs) {
        if (!positives.size() || ![&] {
              for (const auto& d : positives.docs())
                if (d.text == pair.positive) return true;
              return false;
            }())
          positives.add({"p" + std::to_string(i++), std::nullopt, pair.positive, "pairs"});
      }
    }
    const EncoderParams params = load_checkpoint(fl_ckpt);
    const EncoderEmbedder embedder(params);
    const FilterResult result = consistency_filter(pairs, positives, embedder, fl_top);
    save_triples(triples_of(result.retained), fl_out);
    save_triples(triples_of(result.dropped), fl_dropped);
    std::cout << "retained " << result.retained.size() << ", dropped " << result.dropped.size()
              << "\n";
    return 0;
  }

  if (synth_tasks->parsed()) {
    auto client = make_client(sy_stub, sy_seed, sy_endpoint, sy_model);
    const auto tasks = generate_task_pool(*client, sy_count);
    atomic_write(sy_out, [&](std::ostream& out) {
      for (const auto& task : tasks) out << nlohmann::json{{"task", task}}.dump() << "\n";
    });
    std::cout << "wrote " << tasks.size() << " tasks -> " << sy_out << "\n";
    return 0;
  }

  if (synth_examples->parsed()) {
    auto client = make_client(sy_stub, sy_seed, sy_endpoint, sy_model);
    std::vector<std::string> tasks;
    if (!se_tasks_file.empty()) {
      std::ifstream in(se_tasks_file);
      if (!in) throw DataError("cannot open tasks file: " + se_tasks_file);
      std::string line;
      while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        tasks.push_back(nlohmann::json::parse(line).at("task").get<std::string>());
      }
    } else {
      tasks = generate_task_pool(*client, std::max<std::size_t>(sy_count / 5 + 1, 1));
    }
    if (tasks.empty()) throw DataError("no tasks available for example generation");
    Rng rng(sy_seed);
    std::vector<TrainingTriple> triples;
    std::size_t discarded = 0;
    while (triples.size() < sy_count) {
      const std::string& task = tasks[rng.below(tasks.size())];
      const SynthKnobs knobs = sample_knobs(rng);
      const auto example = generate_example(*client, task, knobs, sy_retries);
      if (!example) {
        if (++discarded > 10 * sy_count + 10)
          throw RemoteError("too many discarded generations; giving up");
        continue;
      }
      TrainingTriple triple;
      triple.pair.query = example->user_query;
      triple.pair.positive = example->positive_document;
      triple.pair.origin = PairOrigin::synthetic;
      triple.pair.instruction.query_instruction = example->task;
      triple.hard_negatives.push_back(example->hard_negative_document);
      triples.push_back(std::move(triple));
    }
    save_triples(triples, sy_out);
    std::cout << "wrote " << triples.size() << " synthetic examples (" << discarded
              << " discarded) -> " << sy_out << "\n";
    return 0;
  }

  if (synth_queries->parsed()) {
    auto client = make_client(sy_stub, sy_seed, sy_endpoint, sy_model);
    const Corpus corpus = ingest_jsonl(sy_corpus);
    const InstanceDomain domain =
        sy_domain == "pubmed" ? InstanceDomain::pubmed : InstanceDomain::covid;
    std::vector<TrainingTriple> triples;
    std::size_t discarded = 0;
    for (std::size_t i = 0; i < corpus.size() && triples.size() < sy_count; ++i) {
      const auto pair = generate_instance_query(*client, corpus.docs()[i].text, domain, sy_retries);
      if (!pair) {
        ++discarded;
        continue;
      }
      triples.push_back({*pair, {}});
    }
    save_triples(triples, sy_out);
    std::cout << "wrote " << triples.size() << " synthetic pairs (" << discarded
              << " discarded) -> " << sy_out << "\n";
    return 0;
  }

  if (index_cmd->parsed()) {
    const Corpus corpus = ingest_jsonl(ix_corpus);
    const EncoderParams params = load_checkpoint(ix_ckpt);
    const FlatIndex index =
        build_index(corpus, params, kPassageInstructionTemplate, parse_similarity(ix_similarity));
    EmbeddingTable table;
    for (std::size_t i = 0; i < index.ids.size(); ++i)
      table.add(index.ids[i], index.matrix.row(i).transpose());
    save_embeddings(table, ix_out);
    std::cout << "indexed " << index.ids.size() << " documents -> " << ix_out << "\n";
    return 0;
  }

  if (search_cmd->parsed()) {
    const FlatIndex index = index_from_file(sr_index, parse_similarity(sr_similarity));
    const EncoderParams params = load_checkpoint(sr_ckpt);
    const auto queries = load_queries(sr_queries);
    const RetrievalRun run = batch_search(index, queries, params, sr_k);
    write_run(run, sr_out, sr_tag);
    std::cout << "searched " << queries.size() << " queries -> " << sr_out << "\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    const RetrievalRun run = read_run(ev_run);
    const Qrels qrels = load_qrels(ev_qrels);
    const NdcgGain gain = ev_gain == "exponential" ? NdcgGain::exponential : NdcgGain::linear;
    const auto results = evaluate_metrics(run, qrels, ev_metrics, gain);
    const std::string report = metrics_report_json(results, gain);
    atomic_write(ev_out, [&](std::ostream& out) { out << report << "\n"; });
    for (const auto& [name, result] : results)
      std::cout << name << " = " << result.mean << "\n";
    return 0;
  }

  if (sts_cmd->parsed()) {
    const EncoderParams params = load_checkpoint(st_ckpt);
    const auto pairs = load_sts_pairs(st_pairs);
    const double rho = sts_eval(params, pairs, st_instruction);
    nlohmann::json report{{"spearman", rho}, {"pairs", pairs.size()}};
    atomic_write(st_out, [&](std::ostream& out) { out << report.dump(2) << "\n"; });
    std::cout << "spearman = " << rho << "\n";
    return 0;
  }

  if (simdist->parsed()) {
    const EncoderParams params = load_checkpoint(sd_ckpt);
    const auto triples = load_triples(sd_pairs);
    const LossConfig cosine{1.0, Similarity::cosine};
    HistogramSummary positive, negative;
    for (const auto& triple : triples) {
      const Embedding q =
          encode(params, triple.pair.instruction.query_instruction, triple.pair.query);
      const Embedding p =
          encode(params, triple.pair.instruction.passage_instruction, triple.pair.positive);
      positive.add(sim(q, p, cosine));
      for (const auto& neg : triple.hard_negatives) {
        const Embedding n = encode(params, triple.pair.instruction.passage_instruction, neg);
        negative.add(sim(q, n, cosine));
      }
    }
    nlohmann::json report;
    report["positive"] = positive.to_json();
    report["negative"] = negative.to_json();
    if (positive.count && negative.count)
      report["separation"] = positive.sum / positive.count - negative.sum / negative.count;
    atomic_write(sd_out, [&](std::ostream& out) { out << report.dump(2) << "\n"; });
    std::cout << "positive pairs: " << positive.count << ", negative pairs: " << negative.count
              << "\n";
    return 0;
  }

  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dret::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dret::RemoteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const dret::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
