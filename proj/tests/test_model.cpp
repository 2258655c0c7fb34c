#include <doctest.h>

#include <filesystem>

#include "gazeaeg/error.hpp"
#include "gazeaeg/selftest.hpp"
#include "gazeaeg/synthetic.hpp"
#include "support.hpp"

using namespace gazeaeg;

namespace {

struct Fixture {
  std::vector<Essay> corpus;
  Vocabulary vocab;
  std::vector<EncodedEssay> encoded;

  Fixture() {
    SyntheticCorpusOptions o;
    o.essays_per_prompt = 3;
    corpus = make_synthetic_corpus(o);
    vocab = build_vocab(corpus, 1);
    for (const auto& e : corpus) encoded.push_back(encode_essay(e, vocab, PromptTable::asap(), {12, 20}));
  }

  ModelParams params(const ModelConfig& cfg, std::uint64_t seed = 3) const {
    return init_params(cfg, random_embeddings(vocab, cfg.embed_dim, seed), seed);
  }
};

ModelConfig small_config(bool gaze) {
  ModelConfig c;
  c.embed_dim = 8;
  c.cnn_filters = 6;
  c.lstm_hidden = 5;
  c.attention_dim = 4;
  c.gaze_enabled = gaze;
  return c;
}

}  // namespace

TEST_CASE("init_params") {
  const Fixture fx;
  const auto cfg = small_config(false);
  const auto a = fx.params(cfg, 9);
  CHECK(a.store == fx.params(cfg, 9).store);
  CHECK_FALSE(a.store == fx.params(cfg, 10).store);
  const auto& bias = a.store.value("lstm.bias");
  for (std::size_t i = 0; i < 4 * cfg.lstm_hidden; ++i) {
    const bool forget = i >= cfg.lstm_hidden && i < 2 * cfg.lstm_hidden;
    CHECK(bias[i] == (forget ? 1.0 : 0.0));
  }
  for (std::size_t k = 0; k < cfg.embed_dim; ++k) CHECK(a.store.value("embedding").at(0, k) == 0.0);
  CHECK(a.vocab_size() == fx.vocab.size());

  // Turning gaze on adds no randomness to the shared weights.
  const auto g = fx.params(small_config(true), 9);
  for (std::size_t p = 0; p < a.store.size(); ++p) CHECK(g.store.value(p) == a.store.value(p));

  auto bad = cfg;
  bad.cnn_kernel = 4;
  CHECK_THROWS_AS(fx.params(bad), ConfigError);
  CHECK_THROWS_AS(init_params(cfg, num::Tensor({5, 3}), 1), ConfigError);
}

TEST_CASE("forward contracts") {
  const Fixture fx;
  const auto params = fx.params(small_config(true));
  for (const auto& e : fx.encoded) {
    const auto p = predict(params, e);
    CHECK(p.score_unit > 0.0);
    CHECK(p.score_unit < 1.0);
    CHECK(p.gaze_preds.size() == 5 * e.sentences * e.tokens);
    CHECK(predict(params, e).score_unit == p.score_unit);
  }
  const Essay e{77, 1, "One two three. Four five six seven. Eight nine ten!", 6};
  const auto enc = encode_essay(e, fx.vocab, PromptTable::asap(), {3, 10});
  const auto p = predict(params, enc);
  CHECK(p.sentences == 3);
  CHECK(p.tokens == 10);
  CHECK(p.gaze_preds.size() == 5 * 3 * 10);
  CHECK(p.gaze_preds[enc.cell(2, 9)] == 0.5);  // padded cell

  double total = 0.0;
  for (double w : p.sentence_attention) total += w;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("padded positions never change the score") {
  const Fixture fx;
  const auto params = fx.params(small_config(false));
  for (std::size_t i = 0; i < 4; ++i) {
    auto enc = fx.encoded[i];
    const double before = predict(params, enc).score_unit;
    Rng rng(i);
    for (std::size_t c = 0; c < enc.indices.size(); ++c) {
      if (!enc.token_mask[c]) enc.indices[c] = static_cast<std::int32_t>(rng.below(fx.vocab.size()));
    }
    CHECK(predict(params, enc).score_unit == before);
  }
}

TEST_CASE("gaze disabled: loss is the score MSE and gaze heads are inert") {
  const Fixture fx;
  const auto cfg = small_config(false);
  auto params = fx.params(cfg);
  auto perturbed = params;
  for (auto& v : perturbed.store.value("gaze.w").values()) v += 0.7;
  for (auto& v : perturbed.store.value("gaze.b").values()) v -= 1.3;

  auto enc = fx.encoded[0];
  enc.gaze = toy_essay().gaze;  // labels on a different grid must be ignored when gaze is off
  enc.gaze->mask.resize(enc.sentences * enc.tokens, 1);
  enc.gaze->values.resize(5 * enc.sentences * enc.tokens, 0.3);

  auto run = [&](const ModelParams& p) {
    num::Tape tape;
    Rng rng(4);
    const auto fwd = forward(tape, p, enc, true, rng);
    const auto loss = multitask_loss(tape, fwd, enc, p.config);
    return std::make_pair(loss.total_value, loss.score_mse);
  };
  const auto a = run(params);
  const auto b = run(perturbed);
  CHECK(a.first == a.second);
  CHECK(a.first == b.first);
}

TEST_CASE("no gradient reaches the gaze heads without labels") {
  const Fixture fx;
  const auto params = fx.params(small_config(true));
  const auto& enc = fx.encoded[1];
  REQUIRE_FALSE(enc.gaze.has_value());
  num::Gradients grads(params.store);
  num::Tape tape(&grads);
  Rng rng(5);
  const auto fwd = forward(tape, params, enc, true, rng);
  const auto loss = multitask_loss(tape, fwd, enc, params.config);
  CHECK_FALSE(loss.has_gaze);
  tape.backward(loss.total);
  for (double g : grads[params.index.gaze_w].values()) CHECK(g == 0.0);
  for (double g : grads[params.index.gaze_b].values()) CHECK(g == 0.0);
  double other = 0.0;
  for (double g : grads[params.index.score_w].values()) other += std::abs(g);
  CHECK(other > 0.0);
}

TEST_CASE("multitask_loss with forced per-task errors") {
  const auto essay = toy_essay();
  auto cfg = toy_model_config(true);
  auto params = init_params(cfg, num::Tensor({64, cfg.embed_dim}, 0.01), 2);
  const std::array<double, 5> gaze{0.2, 0.35, 0.5, 0.65, 0.8};
  support::force_constant_heads(params, 0.3, gaze);

  num::Tape tape;
  Rng rng(1);
  const auto fwd = forward(tape, params, essay, false, rng);
  const auto loss = multitask_loss(tape, fwd, essay, cfg);

  const double score = (0.3 - essay.target) * (0.3 - essay.target);
  const double weights[] = {0.05, 0.05, 0.01, 0.01, 0.1};
  double expected = score;
  for (std::size_t a = 0; a < 5; ++a) {
    const double m = support::constant_gaze_mse(essay, a, gaze[a]);
    CHECK(std::abs(loss.gaze_mse[a] - m) <= 1e-12);
    expected += weights[a] * m;
  }
  CHECK(std::abs(loss.score_mse - score) <= 1e-12);
  CHECK(std::abs(loss.total_value - expected) <= 1e-12);

  CHECK(combine_losses(0.04, {0.1, 0.1, 0.1, 0.1, 0.1}, default_gaze_weights()) == doctest::Approx(0.062).epsilon(1e-14));
  CHECK(combine_losses(0.0, {}, default_gaze_weights()) == 0.0);

  cfg.gaze_loss_weights.erase(GazeAttribute::RC);
  CHECK_THROWS_AS(multitask_loss(tape, fwd, essay, cfg), ConfigError);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const Fixture fx;
  auto cfg = small_config(true);
  cfg.word_pooling = WordPooling::Mean;
  auto params = fx.params(cfg, 21);
  params.store.value("score.b")[0] = 0.1 + 0.2;  // not representable in short decimal
  const auto path = std::filesystem::temp_directory_path() / "gazeaeg_ckpt_test.json";
  save_checkpoint(path, params);
  const auto back = load_checkpoint(path);
  std::filesystem::remove(path);
  CHECK(back.config == params.config);
  CHECK(back.store == params.store);
  CHECK(predict(back, fx.encoded[0]).score_unit == predict(params, fx.encoded[0]).score_unit);

  auto doc = checkpoint_to_json(params);
  doc["version"] = 99;
  CHECK_THROWS_AS(checkpoint_from_json(doc), FormatError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.json"), IoError);
}

TEST_CASE("model config JSON round trip") {
  auto c = small_config(true);
  c.dropout_rate = 0.25;
  c.gaze_loss_weights[GazeAttribute::IR] = 0.3;
  CHECK(model_config_from_json(to_json(c)) == c);
  CHECK_THROWS_AS(parse_word_pooling("max"), ConfigError);
}
