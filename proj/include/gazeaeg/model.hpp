#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include <json.hpp>

#include "gazeaeg/gaze.hpp"
#include "gazeaeg/ops.hpp"
#include "gazeaeg/random.hpp"
#include "gazeaeg/textprep.hpp"

namespace gazeaeg {

enum class WordPooling { Attention, Mean };

std::string_view to_string(WordPooling pooling);
WordPooling parse_word_pooling(std::string_view name);

using GazeWeights = std::map<GazeAttribute, double>;

GazeWeights default_gaze_weights();

struct ModelConfig {
  std::size_t embed_dim = 50;
  std::size_t cnn_kernel = 5;
  std::size_t cnn_filters = 100;
  std::size_t lstm_hidden = 100;
  // Width of the tanh projection inside both attention layers.
  std::size_t attention_dim = 100;
  double dropout_rate = 0.5;
  WordPooling word_pooling = WordPooling::Attention;
  bool gaze_enabled = false;
  GazeWeights gaze_loss_weights = default_gaze_weights();

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& doc);

// Positions of the named tensors inside ModelParams::store.
struct ParamIndex {
  std::size_t embedding, cnn_kernels, cnn_bias;
  std::size_t word_attn_w, word_attn_v;
  std::size_t lstm_w_input, lstm_w_hidden, lstm_bias;
  std::size_t sent_attn_w, sent_attn_v;
  std::size_t score_w, score_b;
  std::size_t gaze_w, gaze_b;  // one column per GazeAttribute
};

struct ModelParams {
  ModelConfig config;
  num::ParamStore store;
  ParamIndex index{};

  std::size_t vocab_size() const { return store.value(index.embedding).dim(0); }
};

// Copies the embedding rows; every other weight is uniform in
// [-0.05, 0.05], biases are zero except the LSTM forget gate (1.0).
ModelParams init_params(const ModelConfig& config, const EmbeddingMatrix& embeddings, std::uint64_t seed);

// Rebuilds the index after the store has been filled (e.g. from a file).
ParamIndex resolve_params(const num::ParamStore& store);

struct ForwardResult {
  num::Var score;  // scalar in (0, 1)
  num::Var gaze;   // active tokens x 5, rows in grid order
  std::vector<std::size_t> gaze_cells;  // grid cell of each gaze row
  std::vector<double> sentence_attention;
  std::vector<std::vector<double>> word_attention;  // per active sentence
};

// Embedding -> dropout -> conv + relu -> per-token gaze heads and word
// pooling per sentence; LSTM over sentence vectors -> sentence attention
// -> dropout -> sigmoid score head.
ForwardResult forward(num::Tape& tape, const ModelParams& params, const EncodedEssay& essay, bool train, Rng& rng);

struct EssayPrediction {
  double score_unit = 0.0;
  // 5 x S x T, attribute-major. Padded cells hold 0.5.
  std::vector<double> gaze_preds;
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::vector<double> sentence_attention;
};

EssayPrediction to_prediction(const num::Tape& tape, const ForwardResult& result, const EncodedEssay& essay);

// Eval-mode forward pass.
EssayPrediction predict(const ModelParams& params, const EncodedEssay& essay);

struct LossTerms {
  num::Var total;
  double total_value = 0.0;
  double score_mse = 0.0;
  std::array<double, kGazeAttributeCount> gaze_mse{};
  bool has_gaze = false;
};

// score MSE plus, when gaze is enabled and the essay carries labels, the
// weighted masked MSE of every gaze attribute.
LossTerms multitask_loss(num::Tape& tape, const ForwardResult& result, const EncodedEssay& essay,
                         const ModelConfig& config);

// The weighting applied by multitask_loss to already computed MSEs.
double combine_losses(double score_mse, const std::array<double, kGazeAttributeCount>& gaze_mse,
                      const GazeWeights& weights);

// Versioned JSON map of named tensors plus the model config. Doubles are
// written in shortest round-trip form, so a reload is bit-exact.
nlohmann::json checkpoint_to_json(const ModelParams& params);
ModelParams checkpoint_from_json(const nlohmann::json& doc);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace gazeaeg
