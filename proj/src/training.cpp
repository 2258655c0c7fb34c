#include "gazeaeg/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "gazeaeg/error.hpp"
#include "gazeaeg/evaluation.hpp"

namespace gazeaeg {

namespace {

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs fn(i) for i in [0, jobs). Exceptions are rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t jobs, std::size_t threads, Fn&& fn) {
  const auto workers = worker_count(threads, jobs);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (auto i = next++; i < jobs; i = next++) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
          next = jobs;
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

OptimState::OptimState(const num::ParamStore& params, RmsPropHyper h) : hyper(h) {
  for (const auto& t : params.tensors()) {
    square_avg.emplace_back(t.shape(), 0.0);
    velocity.emplace_back(t.shape(), 0.0);
  }
}

void rmsprop_step(num::ParamStore& params, const num::Gradients& grads, OptimState& state) {
  if (grads.size() != params.size() || state.square_avg.size() != params.size()) {
    throw ParameterError("rmsprop_step: parameter, gradient and state counts differ");
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& g = grads[p];
    if (!g.same_shape(params.value(p)) || !state.square_avg[p].same_shape(g)) {
      throw ParameterError("rmsprop_step: shape mismatch for '" + params.name(p) + "'");
    }
    if (!g.all_finite()) throw TrainingError("non-finite gradient for parameter '" + params.name(p) + "'");
  }
  const auto& h = state.hyper;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto theta = params.value(p).values();
    auto acc = state.square_avg[p].values();
    auto vel = state.velocity[p].values();
    const auto g = grads[p].values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      acc[i] = h.rho * acc[i] + (1.0 - h.rho) * g[i] * g[i];
      vel[i] = h.momentum * vel[i] + h.lr * g[i] / std::sqrt(acc[i] + h.epsilon);
      theta[i] -= vel[i];
    }
  }
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t count, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw ParameterError("batch_size must be at least 1");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const auto end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

nlohmann::json to_json(const EpochRecord& r, bool include_wall_time) {
  nlohmann::json components = {{"score", r.score_loss}};
  for (auto a : kGazeAttributes) components[std::string(to_string(a))] = r.gaze_loss[index_of(a)];
  nlohmann::json j = {{"epoch", r.epoch},
                      {"train_loss", r.train_loss},
                      {"component_losses", components},
                      {"gaze_essays", r.gaze_essays},
                      {"dev_qwk", r.dev_qwk}};
  if (include_wall_time) j["wall_time"] = r.wall_time;
  return j;
}

EpochRecord epoch_record_from_json(const nlohmann::json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.train_loss = j.at("train_loss").get<double>();
  const auto& c = j.at("component_losses");
  r.score_loss = c.at("score").get<double>();
  for (auto a : kGazeAttributes) r.gaze_loss[index_of(a)] = c.at(std::string(to_string(a))).get<double>();
  r.gaze_essays = j.at("gaze_essays").get<std::size_t>();
  r.dev_qwk = j.at("dev_qwk").get<double>();
  r.wall_time = j.value("wall_time", 0.0);
  return r;
}

std::vector<double> predict_scores(const ModelParams& params, std::span<const EncodedEssay> essays,
                                   std::size_t threads) {
  std::vector<double> out(essays.size());
  parallel_for(essays.size(), threads, [&](std::size_t i) { out[i] = predict(params, essays[i]).score_unit; });
  return out;
}

double dev_qwk(const ModelParams& params, std::span<const EncodedEssay> essays, const PromptTable& specs,
               std::size_t threads) {
  if (essays.empty()) throw ConfigError("cannot compute QWK on an empty set");
  const auto units = predict_scores(params, essays, threads);
  std::map<int, std::pair<std::vector<int>, std::vector<int>>> by_prompt;
  for (std::size_t i = 0; i < essays.size(); ++i) {
    const auto& spec = specs.at(essays[i].prompt_id);
    auto& [gold, pred] = by_prompt[essays[i].prompt_id];
    gold.push_back(essays[i].gold_score);
    pred.push_back(denormalize_score(units[i], spec));
  }
  double total = 0.0;
  for (const auto& [prompt, pair] : by_prompt) {
    const auto& spec = specs.at(prompt);
    total += qwk(pair.first, pair.second, spec.min_score, spec.max_score);
  }
  return total / static_cast<double>(by_prompt.size());
}

FoldTraining train_fold(std::span<const EncodedEssay> train, std::span<const EncodedEssay> dev, ModelParams initial,
                        const TrainConfig& cfg, const PromptTable& specs, const EpochObserver& observer) {
  if (train.empty()) throw ConfigError("training set is empty");
  if (dev.empty()) throw ConfigError("development set is empty");
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (cfg.grad_shards == 0) throw ConfigError("grad_shards must be at least 1");

  FoldTraining result;
  result.best_params = initial;
  ModelParams params = std::move(initial);
  params.config = cfg.model;
  result.best_params.config = cfg.model;
  if (cfg.epochs == 0) {
    result.best_dev_qwk = dev_qwk(params, dev, specs, cfg.threads);
    return result;
  }

  OptimState state(params.store, cfg.optimizer);
  std::vector<num::Gradients> shard_grads(cfg.grad_shards, num::Gradients(params.store));
  struct ShardStats {
    double loss = 0.0, score = 0.0;
    std::array<double, kGazeAttributeCount> gaze{};
    std::size_t gaze_essays = 0;
  };
  std::vector<ShardStats> stats(cfg.grad_shards);
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t position = 0;
    for (const auto& batch : batch_iter(train.size(), cfg.batch_size, derive_seed(cfg.seed, epoch))) {
      const auto shards = std::min(cfg.grad_shards, batch.size());
      parallel_for(shards, cfg.threads, [&](std::size_t s) {
        auto& grads = shard_grads[s];
        grads.set_zero();
        stats[s] = {};
        const auto lo = batch.size() * s / shards;
        const auto hi = batch.size() * (s + 1) / shards;
        for (auto k = lo; k < hi; ++k) {
          const auto& essay = train[batch[k]];
          Rng rng(derive_seed(cfg.seed, epoch, position + k));
          num::Tape tape(&grads);
          const auto fwd = forward(tape, params, essay, true, rng);
          const auto loss = multitask_loss(tape, fwd, essay, params.config);
          tape.backward(loss.total);
          stats[s].loss += loss.total_value;
          stats[s].score += loss.score_mse;
          if (loss.has_gaze) {
            ++stats[s].gaze_essays;
            for (std::size_t a = 0; a < kGazeAttributeCount; ++a) stats[s].gaze[a] += loss.gaze_mse[a];
          }
        }
      });
      // Reduce in shard order so the sum is independent of scheduling.
      for (std::size_t s = 1; s < shards; ++s) shard_grads[0].add(shard_grads[s]);
      shard_grads[0].scale(1.0 / static_cast<double>(batch.size()));
      if (cfg.grad_clip > 0.0) {
        double norm2 = 0.0;
        for (std::size_t p = 0; p < shard_grads[0].size(); ++p) {
          for (double g : shard_grads[0][p].values()) norm2 += g * g;
        }
        const double norm = std::sqrt(norm2);
        if (norm > cfg.grad_clip) shard_grads[0].scale(cfg.grad_clip / norm);
      }
      rmsprop_step(params.store, shard_grads[0], state);
      for (std::size_t s = 0; s < shards; ++s) {
        rec.train_loss += stats[s].loss;
        rec.score_loss += stats[s].score;
        rec.gaze_essays += stats[s].gaze_essays;
        for (std::size_t a = 0; a < kGazeAttributeCount; ++a) rec.gaze_loss[a] += stats[s].gaze[a];
      }
      position += batch.size();
    }
    state.hyper.lr *= cfg.lr_decay;
    rec.train_loss /= static_cast<double>(train.size());
    rec.score_loss /= static_cast<double>(train.size());
    if (rec.gaze_essays > 0) {
      for (auto& g : rec.gaze_loss) g /= static_cast<double>(rec.gaze_essays);
    }
    rec.dev_qwk = dev_qwk(params, dev, specs, cfg.threads);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (!have_best || rec.dev_qwk > result.best_dev_qwk) {
      have_best = true;
      result.best_dev_qwk = rec.dev_qwk;
      result.best_epoch = epoch;
      result.best_params.store = params.store;
    }
    result.history.push_back(rec);
    if (observer) observer(rec);
  }
  return result;
}

}  // namespace gazeaeg
