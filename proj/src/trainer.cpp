#include "dret/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "dret/errors.hpp"
#include "dret/rng.hpp"

namespace dret {

namespace {

double parse_double(const std::string& key, const std::string& value) {
  std::size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &consumed);
  } catch (const std::exception&) {
    consumed = std::string::npos;
  }
  if (consumed != value.size() || value.empty())
    throw UsageError("config key '" + key + "': not a number: '" + value + "'");
  return v;
}

long parse_long(const std::string& key, const std::string& value) {
  std::size_t consumed = 0;
  long v = 0;
  try {
    v = std::stol(value, &consumed);
  } catch (const std::exception&) {
    consumed = std::string::npos;
  }
  if (consumed != value.size() || value.empty())
    throw UsageError("config key '" + key + "': not an integer: '" + value + "'");
  return v;
}

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void append_log(const TrainConfig& config, std::vector<StepRecord>* log, const StepRecord& rec) {
  if (log) log->push_back(rec);
  if (!config.loss_log_path.empty()) {
    std::ofstream out(config.loss_log_path, std::ios::app);
    out << rec.step << "," << rec.epoch << "," << rec.lr << "," << rec.loss << "\n";
  }
}

void warn_duplicate_positives(const std::vector<const std::string*>& positives, int step) {
  std::set<std::string> seen;
  for (const auto* p : positives)
    if (!seen.insert(*p).second) {
      std::cerr << "warning: step " << step << ": duplicate positive passage in batch\n";
      return;
    }
}

}  // namespace

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw UsageError("learning_rate must be positive");
  if (batch_size < 2) throw UsageError("batch_size must be >= 2 (in-batch negatives)");
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  if (warmup_steps < 0) throw UsageError("warmup_steps must be >= 0");
  if (weight_decay < 0.0) throw UsageError("weight_decay must be >= 0");
  if (temperature <= 0.0) throw UsageError("temperature must be positive");
  if (checkpoint_every < 0) throw UsageError("checkpoint_every must be >= 0");
}

TrainConfig parse_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  TrainConfig config;
  bool epochs_explicit = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    if (key == "stage") {
      if (value == "pretrain") config.stage = TrainStage::pretrain;
      else if (value == "finetune") config.stage = TrainStage::finetune;
      else throw UsageError("config key 'stage': expected pretrain|finetune, got '" + value + "'");
    } else if (key == "learning_rate") {
      config.learning_rate = parse_double(key, value);
    } else if (key == "batch_size") {
      config.batch_size = static_cast<int>(parse_long(key, value));
    } else if (key == "epochs") {
      config.epochs = static_cast<int>(parse_long(key, value));
      epochs_explicit = true;
    } else if (key == "warmup_steps") {
      config.warmup_steps = static_cast<int>(parse_long(key, value));
    } else if (key == "weight_decay") {
      config.weight_decay = parse_double(key, value);
    } else if (key == "temperature") {
      config.temperature = parse_double(key, value);
    } else if (key == "similarity") {
      if (value == "dot") config.similarity = Similarity::dot;
      else if (value == "cosine") config.similarity = Similarity::cosine;
      else throw UsageError("config key 'similarity': expected dot|cosine, got '" + value + "'");
    } else if (key == "seed") {
      config.seed = static_cast<std::uint64_t>(parse_long(key, value));
    } else if (key == "checkpoint_every") {
      config.checkpoint_every = static_cast<int>(parse_long(key, value));
    } else if (key == "constant_lr") {
      if (value == "true" || value == "1") config.constant_lr = true;
      else if (value == "false" || value == "0") config.constant_lr = false;
      else throw UsageError("config key 'constant_lr': expected true|false, got '" + value + "'");
    } else if (key == "loss_log") {
      config.loss_log_path = value;
    } else {
      throw UsageError(path + ":" + std::to_string(lineno) + ": unknown config key '" + key + "'");
    }
  }
  // The fine-tuning stage runs a single pass unless the file says otherwise.
  if (config.stage == TrainStage::finetune && !epochs_explicit) config.epochs = 1;
  config.validate();
  return config;
}

double lr_at(int step, int total_steps, const TrainConfig& config) {
  if (step < 1) throw UsageError("lr_at: step must be >= 1");
  if (config.warmup_steps > 0 && step <= config.warmup_steps)
    return config.learning_rate * static_cast<double>(step) /
           static_cast<double>(config.warmup_steps);
  if (config.constant_lr) return config.learning_rate;
  if (total_steps <= config.warmup_steps) return config.learning_rate;
  const double remaining = static_cast<double>(total_steps - step);
  return config.learning_rate * remaining /
         static_cast<double>(total_steps - config.warmup_steps);
}

OptimizerState OptimizerState::init(const EncoderParams& params) {
  OptimizerState state;
  state.m = zeros_like(params);
  state.v = zeros_like(params);
  return state;
}

namespace {

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd* tensor;
};

// Tensors of identically-configured EncoderParams visit in the same order,
// so parallel lists line up index-for-index.
std::vector<NamedTensor> tensors_of(EncoderParams& params) {
  std::vector<NamedTensor> out;
  params.for_each_tensor(
      [&](const std::string& name, Eigen::MatrixXd& t) { out.push_back({name, &t}); });
  return out;
}

}  // namespace

void adamw_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state,
                double lr, double weight_decay) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  const auto ps = tensors_of(params);
  const auto gs = tensors_of(const_cast<EncoderParams&>(grads));
  const auto ms = tensors_of(state.m);
  const auto vs = tensors_of(state.v);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Eigen::MatrixXd& p = *ps[i].tensor;
    const Eigen::MatrixXd& g = *gs[i].tensor;
    if (!g.allFinite()) throw DataError("non-finite gradient in tensor '" + ps[i].name + "'");
    Eigen::MatrixXd& m = *ms[i].tensor;
    Eigen::MatrixXd& v = *vs[i].tensor;
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    if (weight_decay > 0.0) p -= lr * weight_decay * p;
    const Eigen::MatrixXd m_hat = m / bc1;
    const Eigen::MatrixXd v_hat = v / bc2;
    p -= lr * m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + state.eps).matrix());
  }
}

namespace {

// One optimizer step shared by both stages. `negatives` may be empty
// (pre-training) or hold exactly one hard negative per pair (fine-tuning).
double train_step(EncoderParams& params, OptimizerState& opt, const TrainConfig& config,
                  const std::vector<const TrainingPair*>& batch,
                  const std::vector<const std::string*>& negatives, double lr, int step) {
  const int n = static_cast<int>(batch.size());
  const int max_len = params.config.max_seq_len;
  std::vector<TokenSequence> query_tokens, passage_tokens;
  std::vector<const std::string*> positives;
  for (const auto* pair : batch) {
    query_tokens.push_back(
        tokenize(render_instruction(pair->instruction.query_instruction, pair->query), max_len));
    passage_tokens.push_back(tokenize(
        render_instruction(pair->instruction.passage_instruction, pair->positive), max_len));
    positives.push_back(&pair->positive);
  }
  warn_duplicate_positives(positives, step);
  for (std::size_t i = 0; i < negatives.size(); ++i)
    passage_tokens.push_back(tokenize(
        render_instruction(batch[i]->instruction.passage_instruction, *negatives[i]), max_len));

  EncoderCache query_cache, passage_cache;
  const Eigen::MatrixXd query_embs = forward_batch(params, query_tokens, &query_cache);
  const Eigen::MatrixXd passage_embs = forward_batch(params, passage_tokens, &passage_cache);

  const LossConfig loss_config{config.temperature, config.similarity};
  const Eigen::MatrixXd scores = score_matrix(query_embs, passage_embs, loss_config);
  const LossResult result = negatives.empty() ? loss_cpt(scores, config.temperature)
                                              : loss_ft(scores, config.temperature);
  if (!std::isfinite(result.loss))
    throw DataError("non-finite loss at step " + std::to_string(step));

  const EmbeddingGrads emb_grads =
      grad_wrt_embeddings(query_embs, passage_embs, result.grad_scores, loss_config);
  EncoderParams grads = backward_batch(params, query_cache, emb_grads.query_grads);
  EncoderParams passage_grads = backward_batch(params, passage_cache, emb_grads.passage_grads);
  const auto gt = tensors_of(grads);
  const auto pt = tensors_of(passage_grads);
  for (std::size_t i = 0; i < gt.size(); ++i) *gt[i].tensor += *pt[i].tensor;
  adamw_step(params, grads, opt, lr, config.weight_decay);
  (void)n;
  return result.loss;
}

void maybe_checkpoint(const TrainConfig& config, const EncoderParams& params, int step) {
  if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() &&
      step % config.checkpoint_every == 0)
    save_checkpoint(params, config.checkpoint_path);
}

}  // namespace

EncoderParams run_pretrain(const TrainConfig& config, const std::vector<TrainingPair>& pairs,
                           const EncoderParams& init, std::vector<StepRecord>* log) {
  config.validate();
  if (pairs.size() < static_cast<std::size_t>(config.batch_size))
    throw DataError("need at least batch_size pairs to pre-train");
  EncoderParams params = init;
  OptimizerState opt = OptimizerState::init(params);
  const int steps_per_epoch = static_cast<int>(pairs.size()) / config.batch_size;
  const int total_steps = steps_per_epoch * config.epochs;
  Rng rng(config.seed);
  int step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (int b = 0; b < steps_per_epoch; ++b) {  // tail batch dropped
      std::vector<const TrainingPair*> batch;
      for (int i = 0; i < config.batch_size; ++i)
        batch.push_back(&pairs[order[b * config.batch_size + i]]);
      ++step;
      const double lr = lr_at(step, total_steps, config);
      const double loss = train_step(params, opt, config, batch, {}, lr, step);
      append_log(config, log, {step, epoch, lr, loss});
      maybe_checkpoint(config, params, step);
    }
  }
  return params;
}

EncoderParams run_finetune(const TrainConfig& config, const std::vector<TrainingTriple>& triples,
                           const EncoderParams& init, std::vector<StepRecord>* log) {
  config.validate();
  if (triples.size() < static_cast<std::size_t>(config.batch_size))
    throw DataError("need at least batch_size triples to fine-tune");
  for (std::size_t i = 0; i < triples.size(); ++i)
    if (triples[i].hard_negatives.empty())
      throw DataError("triple " + std::to_string(i) +
                      " has no hard negative; mine negatives first");
  EncoderParams params = init;
  OptimizerState opt = OptimizerState::init(params);
  const int steps_per_epoch = static_cast<int>(triples.size()) / config.batch_size;
  const int total_steps = steps_per_epoch * config.epochs;
  Rng rng(config.seed);
  int step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(triples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    // One hard negative per triple, resampled each epoch.
    std::vector<std::size_t> neg_choice(triples.size());
    for (std::size_t i = 0; i < triples.size(); ++i)
      neg_choice[i] = rng.below(triples[i].hard_negatives.size());
    for (int b = 0; b < steps_per_epoch; ++b) {
      std::vector<const TrainingPair*> batch;
      std::vector<const std::string*> negatives;
      for (int i = 0; i < config.batch_size; ++i) {
        const std::size_t idx = order[b * config.batch_size + i];
        batch.push_back(&triples[idx].pair);
        negatives.push_back(&triples[idx].hard_negatives[neg_choice[idx]]);
      }
      ++step;
      const double lr = lr_at(step, total_steps, config);
      const double loss = train_step(params, opt, config, batch, negatives, lr, step);
      append_log(config, log, {step, epoch, lr, loss});
      maybe_checkpoint(config, params, step);
    }
  }
  return params;
}

}  // namespace dret
