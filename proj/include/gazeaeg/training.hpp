#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "gazeaeg/dataset.hpp"
#include "gazeaeg/model.hpp"

namespace gazeaeg {

struct RmsPropHyper {
  double lr = 0.001;
  double rho = 0.9;  // decay of the squared-gradient average
  double momentum = 0.9;
  double epsilon = 1e-8;
};

// Per-parameter running mean of squared gradients and momentum buffer.
struct OptimState {
  RmsPropHyper hyper;
  std::vector<num::Tensor> square_avg;
  std::vector<num::Tensor> velocity;

  OptimState() = default;
  OptimState(const num::ParamStore& params, RmsPropHyper hyper);
};

// acc <- rho acc + (1 - rho) g^2;  v <- momentum v + lr g / sqrt(acc + eps);
// theta <- theta - v. Throws TrainingError on a non-finite gradient.
void rmsprop_step(num::ParamStore& params, const num::Gradients& grads, OptimState& state);

struct TrainConfig {
  std::size_t batch_size = 200;
  std::size_t epochs = 50;
  RmsPropHyper optimizer{};
  std::uint64_t seed = 1;
  ModelConfig model{};
  // Disabled by default: global gradient-norm clip (0 = off) and a
  // per-epoch multiplicative learning-rate decay (1 = off).
  double grad_clip = 0.0;
  double lr_decay = 1.0;
  // Gradients are reduced over this many fixed essay shards, so results do
  // not depend on how many threads run them.
  std::size_t grad_shards = 8;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

// Shuffled index batches covering [0, count) exactly once; the last batch
// may be smaller.
std::vector<std::vector<std::size_t>> batch_iter(std::size_t count, std::size_t batch_size, std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double score_loss = 0.0;
  // Mean over the essays that carried gaze labels.
  std::array<double, kGazeAttributeCount> gaze_loss{};
  std::size_t gaze_essays = 0;
  double dev_qwk = 0.0;
  double wall_time = 0.0;  // seconds
};

nlohmann::json to_json(const EpochRecord& record, bool include_wall_time = true);
EpochRecord epoch_record_from_json(const nlohmann::json& doc);

struct FoldTraining {
  ModelParams best_params;
  std::size_t best_epoch = 0;  // 0 = initial parameters
  double best_dev_qwk = 0.0;
  std::vector<EpochRecord> history;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

// Trains for cfg.epochs epochs and keeps the parameters of the epoch with
// the highest development QWK (earliest on ties).
FoldTraining train_fold(std::span<const EncodedEssay> train, std::span<const EncodedEssay> dev, ModelParams initial,
                        const TrainConfig& cfg, const PromptTable& specs = PromptTable::asap(),
                        const EpochObserver& observer = {});

// Eval-mode score predictions on [0, 1].
std::vector<double> predict_scores(const ModelParams& params, std::span<const EncodedEssay> essays,
                                   std::size_t threads = 0);

// Mean over prompts of the QWK between rescaled predictions and gold
// scores, each prompt on its own score range.
double dev_qwk(const ModelParams& params, std::span<const EncodedEssay> essays, const PromptTable& specs,
               std::size_t threads = 0);

}  // namespace gazeaeg
