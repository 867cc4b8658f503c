#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dret/errors.hpp"
#include "dret/trainer.hpp"

using namespace dret;

namespace {

TrainConfig base_config() {
  TrainConfig config;
  config.learning_rate = 1e-3;
  config.batch_size = 4;
  config.epochs = 2;
  config.warmup_steps = 100;
  return config;
}

EncoderParams scalarish_params() {
  EncoderConfig config;
  config.d_model = 8;
  config.n_layers = 0;
  config.n_heads = 1;
  config.max_seq_len = 8;
  return init_params(config);
}

std::vector<TrainingPair> toy_pairs(int n) {
  std::vector<TrainingPair> pairs;
  for (int i = 0; i < n; ++i) {
    TrainingPair p;
    p.query = "query " + std::to_string(i);
    p.positive = "passage " + std::to_string(i);
    // Bare templates: the tiny max_seq_len in these tests would otherwise
    // truncate every rendered text to the same instruction prefix.
    p.instruction = {"{}", "{}"};
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace

TEST_CASE("lr schedule: warmup, peak, decay to zero") {
  TrainConfig config = base_config();
  CHECK(lr_at(50, 1000, config) == doctest::Approx(5e-4).epsilon(1e-12));
  CHECK(lr_at(100, 1000, config) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(lr_at(1000, 1000, config) == doctest::Approx(0.0));
  // Piecewise-linear midpoint of the decay leg.
  CHECK(lr_at(550, 1000, config) == doctest::Approx(5e-4).epsilon(1e-12));

  config.constant_lr = true;
  CHECK(lr_at(550, 1000, config) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(lr_at(1000, 1000, config) == doctest::Approx(1e-3).epsilon(1e-12));
}

TEST_CASE("adamw: zero gradient leaves params unchanged without decay") {
  EncoderParams params = scalarish_params();
  const EncoderParams before = params;
  OptimizerState state = OptimizerState::init(params);
  adamw_step(params, zeros_like(params), state, 0.01, 0.0);
  CHECK(params.token_embedding == before.token_embedding);
  CHECK(params.final_scale == before.final_scale);
}

TEST_CASE("adamw: zero gradient with decay scales every tensor by 1 - lr*wd") {
  EncoderParams params = scalarish_params();
  const EncoderParams before = params;
  OptimizerState state = OptimizerState::init(params);
  adamw_step(params, zeros_like(params), state, 0.01, 0.1);
  CHECK((params.token_embedding - 0.999 * before.token_embedding).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((params.layers.empty()));
  CHECK((params.final_bias - 0.999 * before.final_bias).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("adamw: unit gradient first step moves by about -lr") {
  EncoderParams params = scalarish_params();
  const double before = params.token_embedding(0, 0);
  EncoderParams grads = zeros_like(params);
  grads.token_embedding.setOnes();
  OptimizerState state = OptimizerState::init(params);
  adamw_step(params, grads, state, 0.01, 0.0);
  // m-hat = 1, v-hat = 1 after bias correction: update = -lr/(1 + eps).
  const double expect = before - 0.01 / (1.0 + 1e-8);
  CHECK(params.token_embedding(0, 0) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(state.step == 1);
}

TEST_CASE("adamw rejects non-finite gradients naming the tensor") {
  EncoderParams params = scalarish_params();
  EncoderParams grads = zeros_like(params);
  grads.position_embedding(0, 0) = std::nan("");
  OptimizerState state = OptimizerState::init(params);
  CHECK_THROWS_WITH_AS(adamw_step(params, grads, state, 0.01, 0.0),
                       doctest::Contains("position_embedding"), DataError);
}

TEST_CASE("train config file parsing") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "train.cfg").string();
  {
    std::ofstream out(path);
    out << "# comment line\n"
           "stage = finetune\n"
           "learning_rate = 0.005\n"
           "batch_size = 8\n"
           "epochs = 3\n"
           "warmup_steps = 7\n"
           "weight_decay = 0.02\n"
           "temperature = 0.5\n"
           "similarity = cosine\n"
           "seed = 42\n"
           "constant_lr = true\n";
  }
  const TrainConfig config = parse_train_config(path);
  CHECK(config.stage == TrainStage::finetune);
  CHECK(config.learning_rate == 0.005);
  CHECK(config.batch_size == 8);
  CHECK(config.epochs == 3);
  CHECK(config.warmup_steps == 7);
  CHECK(config.weight_decay == 0.02);
  CHECK(config.temperature == 0.5);
  CHECK(config.similarity == Similarity::cosine);
  CHECK(config.seed == 42);
  CHECK(config.constant_lr);

  {
    std::ofstream out(path);
    out << "unknown_key = 1\n";
  }
  CHECK_THROWS_AS(parse_train_config(path), UsageError);
  {
    std::ofstream out(path);
    out << "batch_size = 1\n";
  }
  CHECK_THROWS_AS(parse_train_config(path), UsageError);  // in-batch negatives need >= 2
  std::remove(path.c_str());
}

TEST_CASE("pretrain drops tail batches and steps the expected number of times") {
  TrainConfig config = base_config();
  config.warmup_steps = 2;
  EncoderConfig enc;
  enc.d_model = 8;
  enc.n_layers = 1;
  enc.n_heads = 1;
  enc.max_seq_len = 16;
  std::vector<StepRecord> log;
  run_pretrain(config, toy_pairs(10), init_params(enc), &log);
  CHECK(log.size() == 4);  // 10/4 = 2 full batches per epoch, 2 epochs
  CHECK(log.front().step == 1);
  CHECK(log.back().step == 4);
  CHECK(log.back().epoch == 2);
  for (const auto& record : log) CHECK(std::isfinite(record.loss));
}

TEST_CASE("pretrain is deterministic for a fixed seed") {
  TrainConfig config = base_config();
  config.warmup_steps = 1;
  config.seed = 9;
  EncoderConfig enc;
  enc.d_model = 8;
  enc.n_layers = 1;
  enc.n_heads = 1;
  enc.max_seq_len = 16;
  const EncoderParams init = init_params(enc);
  const EncoderParams a = run_pretrain(config, toy_pairs(8), init);
  const EncoderParams b = run_pretrain(config, toy_pairs(8), init);
  bool identical = true;
  a.for_each_tensor([&](const std::string& name, const Eigen::MatrixXd& t) {
    b.for_each_tensor([&](const std::string& n2, const Eigen::MatrixXd& t2) {
      if (name == n2 && t != t2) identical = false;
    });
  });
  CHECK(identical);

  config.seed = 10;
  const EncoderParams c = run_pretrain(config, toy_pairs(8), init);
  CHECK(a.token_embedding != c.token_embedding);
}

TEST_CASE("finetune requires hard negatives and reports the offender") {
  TrainConfig config = base_config();
  config.stage = TrainStage::finetune;
  config.epochs = 1;
  EncoderConfig enc;
  enc.d_model = 8;
  enc.n_layers = 0;
  enc.n_heads = 1;
  enc.max_seq_len = 16;
  std::vector<TrainingTriple> triples;
  for (int i = 0; i < 4; ++i) {
    TrainingTriple t;
    t.pair.query = "q" + std::to_string(i);
    t.pair.positive = "p" + std::to_string(i);
    t.hard_negatives = {"n" + std::to_string(i)};
    triples.push_back(std::move(t));
  }
  triples[2].hard_negatives.clear();
  CHECK_THROWS_WITH_AS(run_finetune(config, triples, init_params(enc)),
                       doctest::Contains("2"), DataError);

  triples[2].hard_negatives = {"n2"};
  std::vector<StepRecord> log;
  run_finetune(config, triples, init_params(enc), &log);
  CHECK(log.size() == 1);
  CHECK(std::isfinite(log[0].loss));
}

TEST_CASE("loss log file gets one csv row per step") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "loss_log.csv").string();
  std::remove(path.c_str());
  TrainConfig config = base_config();
  config.warmup_steps = 1;
  config.loss_log_path = path;
  EncoderConfig enc;
  enc.d_model = 8;
  enc.n_layers = 0;
  enc.n_heads = 1;
  enc.max_seq_len = 16;
  run_pretrain(config, toy_pairs(8), init_params(enc));
  std::ifstream in(path);
  int rows = 0;
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) {
      ++rows;
      last = line;
    }
  CHECK(rows == 4);  // 2 steps/epoch * 2 epochs
  CHECK(last.find(',') != std::string::npos);
  std::remove(path.c_str());
}
