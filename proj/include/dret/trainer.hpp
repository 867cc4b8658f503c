#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dret/encoder.hpp"
#include "dret/objective.hpp"
#include "dret/pairgen.hpp"

namespace dret {

enum class TrainStage { pretrain, finetune };

struct TrainConfig {
  TrainStage stage = TrainStage::pretrain;
  double learning_rate = 1e-3;
  int batch_size = 16;
  int epochs = 2;  // finetune defaults to 1
  int warmup_steps = 100;
  double weight_decay = 0.01;
  double temperature = 1.0;
  Similarity similarity = Similarity::dot;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;          // 0 = only the final checkpoint
  bool constant_lr = false;          // skip the post-warmup linear decay
  std::string checkpoint_path;       // cadence checkpoints land here
  std::string loss_log_path;         // CSV "step,epoch,lr,loss", appended

  void validate() const;  // throws UsageError
};

// Flat key=value file; '#' starts a comment; unknown keys are errors.
TrainConfig parse_train_config(const std::string& path);

// Linear warmup to learning_rate at step == warmup_steps, then linear decay
// to zero at total_steps (or flat when constant_lr). step is 1-based.
double lr_at(int step, int total_steps, const TrainConfig& config);

struct OptimizerState {
  EncoderParams m;  // first moments, parameter-shaped
  EncoderParams v;  // second moments
  int step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static OptimizerState init(const EncoderParams& params);
};

// One AdamW update with bias correction; weight decay is decoupled from the
// adaptive step. Throws DataError naming the tensor on a non-finite gradient.
void adamw_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state,
                double lr, double weight_decay);

struct StepRecord {
  int step = 0;
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
};

EncoderParams run_pretrain(const TrainConfig& config, const std::vector<TrainingPair>& pairs,
                           const EncoderParams& init, std::vector<StepRecord>* log = nullptr);

// Every triple must carry at least one hard negative; one is sampled per
// triple per epoch.
EncoderParams run_finetune(const TrainConfig& config, const std::vector<TrainingTriple>& triples,
                           const EncoderParams& init, std::vector<StepRecord>* log = nullptr);

}  // namespace dret
