#include "gazeaeg/model.hpp"

#include <algorithm>

#include "gazeaeg/error.hpp"

namespace gazeaeg {

std::string_view to_string(WordPooling pooling) {
  return pooling == WordPooling::Attention ? "attention" : "mean";
}

WordPooling parse_word_pooling(std::string_view name) {
  if (name == "attention") return WordPooling::Attention;
  if (name == "mean") return WordPooling::Mean;
  throw ConfigError("word_pooling must be 'attention' or 'mean', got '" + std::string(name) + "'");
}

GazeWeights default_gaze_weights() {
  return {{GazeAttribute::DT, 0.05},
          {GazeAttribute::FFD, 0.05},
          {GazeAttribute::IR, 0.01},
          {GazeAttribute::RC, 0.01},
          {GazeAttribute::Skip, 0.1}};
}

nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [attr, w] : c.gaze_loss_weights) weights[std::string(to_string(attr))] = w;
  return {{"embed_dim", c.embed_dim},
          {"cnn_kernel", c.cnn_kernel},
          {"cnn_filters", c.cnn_filters},
          {"lstm_hidden", c.lstm_hidden},
          {"attention_dim", c.attention_dim},
          {"dropout_rate", c.dropout_rate},
          {"word_pooling", std::string(to_string(c.word_pooling))},
          {"gaze_enabled", c.gaze_enabled},
          {"gaze_loss_weights", weights}};
}

ModelConfig model_config_from_json(const nlohmann::json& doc) {
  ModelConfig c;
  try {
    c.embed_dim = doc.at("embed_dim").get<std::size_t>();
    c.cnn_kernel = doc.at("cnn_kernel").get<std::size_t>();
    c.cnn_filters = doc.at("cnn_filters").get<std::size_t>();
    c.lstm_hidden = doc.at("lstm_hidden").get<std::size_t>();
    c.attention_dim = doc.at("attention_dim").get<std::size_t>();
    c.dropout_rate = doc.at("dropout_rate").get<double>();
    c.word_pooling = parse_word_pooling(doc.at("word_pooling").get<std::string>());
    c.gaze_enabled = doc.at("gaze_enabled").get<bool>();
    c.gaze_loss_weights.clear();
    for (const auto& [name, w] : doc.at("gaze_loss_weights").items()) {
      c.gaze_loss_weights[parse_gaze_attribute(name)] = w.get<double>();
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed model config: ") + ex.what());
  }
  return c;
}

namespace {

void validate_config(const ModelConfig& c) {
  if (c.embed_dim == 0 || c.cnn_filters == 0 || c.lstm_hidden == 0 || c.attention_dim == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (c.cnn_kernel == 0 || c.cnn_kernel % 2 == 0) {
    throw ConfigError("cnn_kernel must be odd, got " + std::to_string(c.cnn_kernel));
  }
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
}

num::Tensor uniform(num::Shape shape, Rng& rng) {
  num::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-0.05, 0.05);
  return t;
}

}  // namespace

ParamIndex resolve_params(const num::ParamStore& s) {
  ParamIndex i{};
  i.embedding = s.index_of("embedding");
  i.cnn_kernels = s.index_of("cnn.kernels");
  i.cnn_bias = s.index_of("cnn.bias");
  i.word_attn_w = s.index_of("word_attn.w");
  i.word_attn_v = s.index_of("word_attn.v");
  i.lstm_w_input = s.index_of("lstm.w_input");
  i.lstm_w_hidden = s.index_of("lstm.w_hidden");
  i.lstm_bias = s.index_of("lstm.bias");
  i.sent_attn_w = s.index_of("sent_attn.w");
  i.sent_attn_v = s.index_of("sent_attn.v");
  i.score_w = s.index_of("score.w");
  i.score_b = s.index_of("score.b");
  i.gaze_w = s.index_of("gaze.w");
  i.gaze_b = s.index_of("gaze.b");
  return i;
}

ModelParams init_params(const ModelConfig& config, const EmbeddingMatrix& embeddings, std::uint64_t seed) {
  validate_config(config);
  if (embeddings.rank() != 2 || embeddings.dim(1) != config.embed_dim) {
    throw ConfigError("embedding matrix " + num::shape_string(embeddings.shape()) + " does not match embed_dim " +
                      std::to_string(config.embed_dim));
  }
  const auto e = config.embed_dim, k = config.cnn_kernel, f = config.cnn_filters, h = config.lstm_hidden,
             a = config.attention_dim;
  Rng rng(derive_seed(seed, 0x1417ULL));
  ModelParams p;
  p.config = config;
  auto& s = p.store;
  num::Tensor emb = embeddings;
  std::fill_n(emb.data(), e, 0.0);
  s.add("embedding", std::move(emb));
  s.add("cnn.kernels", uniform({k, e, f}, rng));
  s.add("cnn.bias", num::Tensor({f}));
  s.add("word_attn.w", uniform({f, a}, rng));
  s.add("word_attn.v", uniform({a}, rng));
  s.add("lstm.w_input", uniform({f, 4 * h}, rng));
  s.add("lstm.w_hidden", uniform({h, 4 * h}, rng));
  num::Tensor lstm_bias({4 * h});
  std::fill_n(lstm_bias.data() + h, h, 1.0);
  s.add("lstm.bias", std::move(lstm_bias));
  s.add("sent_attn.w", uniform({h, a}, rng));
  s.add("sent_attn.v", uniform({a}, rng));
  s.add("score.w", uniform({h, 1}, rng));
  s.add("score.b", num::Tensor({1}));
  // Drawn last so the gaze heads never shift the other weights' values.
  s.add("gaze.w", uniform({f, kGazeAttributeCount}, rng));
  s.add("gaze.b", num::Tensor({kGazeAttributeCount}));
  p.index = resolve_params(s);
  return p;
}

ForwardResult forward(num::Tape& tape, const ModelParams& params, const EncodedEssay& essay, bool train, Rng& rng) {
  const auto& cfg = params.config;
  const auto& ix = params.index;
  const auto& s = params.store;
  if (essay.indices.size() != essay.sentences * essay.tokens || essay.token_mask.size() != essay.indices.size() ||
      essay.sentence_mask.size() != essay.sentences) {
    throw InferenceError("essay " + std::to_string(essay.essay_id) + ": inconsistent grid shapes");
  }

  const auto embedding = tape.param(s, ix.embedding);
  const auto kernels = tape.param(s, ix.cnn_kernels);
  const auto cnn_bias = tape.param(s, ix.cnn_bias);
  const num::AttentionWeights word_attn{tape.param(s, ix.word_attn_w), tape.param(s, ix.word_attn_v)};

  ForwardResult out;
  std::vector<num::Var> sentence_vectors;
  std::vector<num::Var> features;
  std::vector<std::int32_t> ids;
  for (std::size_t sent = 0; sent < essay.sentences; ++sent) {
    if (!essay.sentence_mask[sent]) continue;
    ids.clear();
    for (std::size_t t = 0; t < essay.tokens; ++t) {
      const auto c = essay.cell(sent, t);
      if (!essay.token_mask[c]) continue;
      ids.push_back(essay.indices[c]);
      out.gaze_cells.push_back(c);
    }
    if (ids.empty()) continue;
    auto x = num::gather_rows(tape, embedding, ids);
    x = num::dropout(tape, x, cfg.dropout_rate, train, rng);
    const auto feat = num::relu(tape, num::conv1d_same(tape, x, kernels, cnn_bias));
    features.push_back(feat);
    if (cfg.word_pooling == WordPooling::Attention) {
      auto pooled = num::attention_pool(tape, feat, word_attn);
      sentence_vectors.push_back(pooled.output);
      out.word_attention.push_back(std::move(pooled.weights));
    } else {
      sentence_vectors.push_back(num::mean_pool(tape, feat));
      out.word_attention.emplace_back(ids.size(), 1.0 / static_cast<double>(ids.size()));
    }
  }
  if (sentence_vectors.empty()) {
    throw InferenceError("essay " + std::to_string(essay.essay_id) + " has no unmasked sentences");
  }

  const auto all_features = num::concat_rows(tape, features);
  out.gaze = num::sigmoid(
      tape, num::linear(tape, all_features, tape.param(s, ix.gaze_w), tape.param(s, ix.gaze_b)));

  const num::LstmWeights lstm{tape.param(s, ix.lstm_w_input), tape.param(s, ix.lstm_w_hidden),
                              tape.param(s, ix.lstm_bias)};
  const auto states = num::lstm_seq(tape, num::stack_rows(tape, sentence_vectors), lstm);
  auto essay_vec = num::attention_pool(tape, states, {tape.param(s, ix.sent_attn_w), tape.param(s, ix.sent_attn_v)});
  out.sentence_attention = std::move(essay_vec.weights);
  const auto dropped = num::dropout(tape, essay_vec.output, cfg.dropout_rate, train, rng);
  out.score = num::sigmoid(tape, num::linear(tape, dropped, tape.param(s, ix.score_w), tape.param(s, ix.score_b)));
  return out;
}

EssayPrediction to_prediction(const num::Tape& tape, const ForwardResult& result, const EncodedEssay& essay) {
  EssayPrediction p;
  p.score_unit = tape.value(result.score).item();
  p.sentences = essay.sentences;
  p.tokens = essay.tokens;
  p.sentence_attention = result.sentence_attention;
  const auto cells = essay.sentences * essay.tokens;
  p.gaze_preds.assign(kGazeAttributeCount * cells, 0.5);
  const auto& g = tape.value(result.gaze);
  for (std::size_t r = 0; r < result.gaze_cells.size(); ++r) {
    for (std::size_t a = 0; a < kGazeAttributeCount; ++a) {
      p.gaze_preds[a * cells + result.gaze_cells[r]] = g[r * kGazeAttributeCount + a];
    }
  }
  return p;
}

EssayPrediction predict(const ModelParams& params, const EncodedEssay& essay) {
  num::Tape tape;
  Rng unused(0);
  const auto result = forward(tape, params, essay, false, unused);
  return to_prediction(tape, result, essay);
}

double combine_losses(double score_mse, const std::array<double, kGazeAttributeCount>& gaze_mse,
                      const GazeWeights& weights) {
  double total = score_mse;
  for (auto a : kGazeAttributes) {
    const auto it = weights.find(a);
    if (it == weights.end()) throw ConfigError("missing gaze loss weight for " + std::string(to_string(a)));
    total += it->second * gaze_mse[index_of(a)];
  }
  return total;
}

LossTerms multitask_loss(num::Tape& tape, const ForwardResult& result, const EncodedEssay& essay,
                         const ModelConfig& config) {
  LossTerms terms;
  const auto score = num::mse(tape, result.score, num::Tensor::scalar(essay.target));
  terms.score_mse = tape.value(score).item();
  std::vector<num::Var> parts{score};
  std::vector<double> weights{1.0};

  if (config.gaze_enabled) {
    std::array<double, kGazeAttributeCount> w{};
    for (auto a : kGazeAttributes) {
      const auto it = config.gaze_loss_weights.find(a);
      if (it == config.gaze_loss_weights.end()) {
        throw ConfigError("gaze enabled but no loss weight for " + std::string(to_string(a)));
      }
      w[index_of(a)] = it->second;
    }
    const auto* grid = essay.gaze ? &*essay.gaze : nullptr;
    const auto n = result.gaze_cells.size();
    if (grid != nullptr && n > 0 &&
        std::any_of(result.gaze_cells.begin(), result.gaze_cells.end(), [&](auto c) { return grid->mask[c] != 0; })) {
      terms.has_gaze = true;
      const auto cells = essay.sentences * essay.tokens;
      num::Tensor mask({n});
      for (std::size_t r = 0; r < n; ++r) mask[r] = grid->mask[result.gaze_cells[r]];
      for (auto a : kGazeAttributes) {
        const auto ai = index_of(a);
        num::Tensor target({n});
        for (std::size_t r = 0; r < n; ++r) target[r] = grid->values[ai * cells + result.gaze_cells[r]];
        const auto m = num::mse(tape, num::column(tape, result.gaze, ai), target, &mask);
        terms.gaze_mse[ai] = tape.value(m).item();
        parts.push_back(m);
        weights.push_back(w[ai]);
      }
    }
  }
  terms.total = num::weighted_sum(tape, parts, weights);
  terms.total_value = tape.value(terms.total).item();
  return terms;
}

}  // namespace gazeaeg
