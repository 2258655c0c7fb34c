#include "gazeaeg/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>

#include "gazeaeg/evaluation.hpp"
#include "gazeaeg/grad_check.hpp"
#include "gazeaeg/training.hpp"

namespace gazeaeg {

namespace {

using num::ParamStore;
using num::Tape;
using num::Tensor;
using num::Var;

// Entries in +-[0.1, 1] so relu never sits on its kink.
Tensor away_from_zero(num::Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.1, 1.0);
  return t;
}

// sum(out * r) for a fixed random r, so every output entry matters.
Var project(Tape& tape, Var out, std::uint64_t seed) {
  Rng rng(seed);
  Tensor r(tape.value(out).shape());
  for (auto& v : r.values()) v = rng.uniform(-1.0, 1.0);
  return num::sum(tape, num::mul(tape, out, tape.constant(std::move(r))));
}

struct OpCase {
  std::string name;
  std::vector<num::Shape> inputs;
  std::function<Var(Tape&, const std::vector<Var>&)> build;
};

std::vector<OpCase> op_cases() {
  using V = std::vector<Var>;
  std::vector<OpCase> c;
  c.push_back({"add", {{3, 2}, {3, 2}}, [](Tape& t, const V& x) { return num::add(t, x[0], x[1]); }});
  c.push_back({"scale", {{4}}, [](Tape& t, const V& x) { return num::scale(t, x[0], -1.7); }});
  c.push_back({"mul", {{2, 3}, {2, 3}}, [](Tape& t, const V& x) { return num::mul(t, x[0], x[1]); }});
  c.push_back({"sum", {{2, 3}}, [](Tape& t, const V& x) { return num::sum(t, x[0]); }});
  c.push_back({"weighted_sum", {{1}, {1}, {1}}, [](Tape& t, const V& x) {
                 const double w[] = {1.0, 0.05, 0.1};
                 return num::weighted_sum(t, x, w);
               }});
  c.push_back({"relu", {{3, 3}}, [](Tape& t, const V& x) { return num::relu(t, x[0]); }});
  c.push_back({"tanh", {{3, 3}}, [](Tape& t, const V& x) { return num::tanh(t, x[0]); }});
  c.push_back({"sigmoid", {{3, 3}}, [](Tape& t, const V& x) { return num::sigmoid(t, x[0]); }});
  c.push_back({"matmul", {{2, 3}, {3, 4}}, [](Tape& t, const V& x) { return num::matmul(t, x[0], x[1]); }});
  c.push_back({"linear", {{3, 4}, {4, 2}, {2}}, [](Tape& t, const V& x) { return num::linear(t, x[0], x[1], x[2]); }});
  c.push_back({"linear_vector", {{4}, {4, 2}, {2}},
               [](Tape& t, const V& x) { return num::linear(t, x[0], x[1], x[2]); }});
  c.push_back({"gather_rows", {{5, 3}}, [](Tape& t, const V& x) {
                 const std::int32_t rows[] = {4, 1, 4, 0};
                 return num::gather_rows(t, x[0], rows);
               }});
  c.push_back({"dropout", {{4, 5}}, [](Tape& t, const V& x) {
                 Rng rng(99);
                 return num::dropout(t, x[0], 0.5, true, rng);
               }});
  c.push_back({"conv1d_same", {{6, 3}, {5, 3, 4}, {4}},
               [](Tape& t, const V& x) { return num::conv1d_same(t, x[0], x[1], x[2]); }});
  c.push_back({"lstm_seq", {{4, 3}, {3, 8}, {2, 8}, {8}},
               [](Tape& t, const V& x) { return num::lstm_seq(t, x[0], {x[1], x[2], x[3]}); }});
  c.push_back({"attention_pool", {{4, 3}, {3, 2}, {2}}, [](Tape& t, const V& x) {
                 const std::uint8_t mask[] = {1, 0, 1, 1};
                 return num::attention_pool(t, x[0], {x[1], x[2]}, mask).output;
               }});
  c.push_back({"mean_pool", {{4, 3}}, [](Tape& t, const V& x) {
                 const std::uint8_t mask[] = {1, 1, 0, 1};
                 return num::mean_pool(t, x[0], mask);
               }});
  c.push_back({"stack_rows", {{3}, {3}}, [](Tape& t, const V& x) { return num::stack_rows(t, x); }});
  c.push_back({"concat_rows", {{2, 3}, {3}, {1, 3}}, [](Tape& t, const V& x) { return num::concat_rows(t, x); }});
  c.push_back({"column", {{3, 4}}, [](Tape& t, const V& x) { return num::column(t, x[0], 2); }});
  c.push_back({"mse", {{2, 3}}, [](Tape& t, const V& x) {
                 const Tensor target = Tensor::matrix(2, 3, {0.1, 0.9, 0.5, 0.0, 1.0, 0.3});
                 const Tensor mask = Tensor::matrix(2, 3, {1, 0, 1, 1, 1, 0});
                 return num::mse(t, x[0], target, &mask);
               }});
  return c;
}

}  // namespace

std::vector<CheckResult> op_gradient_checks(double limit) {
  std::vector<CheckResult> results;
  std::uint64_t seed = 11;
  for (const auto& c : op_cases()) {
    Rng rng(++seed);
    ParamStore store;
    for (std::size_t i = 0; i < c.inputs.size(); ++i) store.add("x" + std::to_string(i), away_from_zero(c.inputs[i], rng));
    const auto projection_seed = seed * 31;
    const num::ParamFn f = [&](Tape& tape, const ParamStore& s) {
      std::vector<Var> vars;
      for (std::size_t i = 0; i < s.size(); ++i) vars.push_back(tape.param(s, i));
      return project(tape, c.build(tape, vars), projection_seed);
    };
    const double err = num::grad_check(f, store);
    results.push_back({c.name, err, limit, err <= limit});
  }
  return results;
}

ModelConfig toy_model_config(bool gaze_enabled, WordPooling pooling) {
  ModelConfig c;
  c.embed_dim = 4;
  c.cnn_kernel = 3;
  c.cnn_filters = 3;
  c.lstm_hidden = 3;
  c.attention_dim = 3;
  c.dropout_rate = 0.5;
  c.word_pooling = pooling;
  c.gaze_enabled = gaze_enabled;
  return c;
}

EncodedEssay toy_essay() {
  const Essay essay{1, 1, "The cat sat on the mat. It was very happy!", 8};
  const std::vector<Essay> corpus{essay};
  const auto vocab = build_vocab(corpus, 1);
  auto enc = encode_essay(essay, vocab, PromptTable::asap(), {4, 8});
  GazeLabels labels;
  const auto n = enc.flat_to_cell.size();
  labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels.mask[i] = i % 4 != 3;
    labels.values[index_of(GazeAttribute::DT)][i] = static_cast<double>(i % 5) / 4.0;
    labels.values[index_of(GazeAttribute::FFD)][i] = static_cast<double>((i + 2) % 5) / 4.0;
    labels.values[index_of(GazeAttribute::IR)][i] = static_cast<double>(i % 2);
    labels.values[index_of(GazeAttribute::RC)][i] = static_cast<double>((i * 3) % 5) / 4.0;
    labels.values[index_of(GazeAttribute::Skip)][i] = i % 3 == 0 ? 1.0 : 0.0;
  }
  enc.gaze = align_gaze(GazeLabelMap{{essay.essay_id, labels}}, enc);
  return enc;
}

double network_gradient_error(const ModelConfig& config, const EncodedEssay& essay, std::uint64_t seed, double eps) {
  const auto vocab_rows = static_cast<std::size_t>(*std::max_element(essay.indices.begin(), essay.indices.end())) + 1;
  Rng rng(seed);
  Tensor emb({vocab_rows, config.embed_dim});
  for (auto& v : emb.values()) v = rng.uniform(-0.5, 0.5);
  const auto init = init_params(config, emb, seed);
  // Larger weights than the training init so every path carries signal.
  ModelParams holder = init;
  for (auto& t : holder.store.tensors()) {
    for (auto& v : t.values()) v *= 8.0;
  }
  const auto start = holder.store;
  const num::ParamFn f = [&](Tape& tape, const ParamStore& s) {
    holder.store = s;
    Rng dropout_rng(seed + 1);
    const auto fwd = forward(tape, holder, essay, true, dropout_rng);
    return multitask_loss(tape, fwd, essay, holder.config).total;
  };
  return num::grad_check(f, start, eps);
}

namespace {

double brute_qwk(const std::vector<int>& g, const std::vector<int>& p) {
  const auto n = static_cast<double>(g.size());
  double observed = 0.0, expected = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) observed += (g[k] - p[k]) * (g[k] - p[k]);
  for (int a : g) {
    for (int b : p) expected += (a - b) * (a - b);
  }
  observed /= n;
  expected /= n * n;
  return expected == 0.0 ? 1.0 : 1.0 - observed / expected;
}

// Two-sided p from Simpson integration of the t density.
double integrated_p(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  const auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int n = 20000;
  const double a = 0.0, b = std::abs(t), h = (b - a) / n;
  double s = pdf(a) + pdf(b);
  for (int i = 1; i < n; ++i) s += pdf(a + i * h) * (i % 2 ? 4 : 2);
  return 1.0 - 2.0 * (s * h / 3.0);
}

}  // namespace

bool run_selftest(std::ostream& out) {
  std::vector<CheckResult> all = op_gradient_checks();
  const auto essay = toy_essay();
  for (bool gaze : {false, true}) {
    for (auto pooling : {WordPooling::Attention, WordPooling::Mean}) {
      const double err = network_gradient_error(toy_model_config(gaze, pooling), essay, 5);
      all.push_back({std::string("network/") + (gaze ? "gaze/" : "nogaze/") + std::string(to_string(pooling)), err,
                     1e-4, err <= 1e-4});
    }
  }

  {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
      const int lo = static_cast<int>(rng.below(3));
      const int hi = lo + 1 + static_cast<int>(rng.below(60));
      const auto n = 2 + rng.below(199);
      std::vector<int> g(n), p(n);
      for (std::size_t i = 0; i < n; ++i) {
        g[i] = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
        p[i] = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
      }
      worst = std::max(worst, std::abs(qwk(g, p, lo, hi) - brute_qwk(g, p)));
    }
    all.push_back({"qwk/pairwise-oracle", worst, 1e-12, worst <= 1e-12});
  }

  {
    num::ParamStore store;
    store.add("theta", Tensor::scalar(1.0));
    OptimState state(store, RmsPropHyper{});
    double theta = 1.0, acc = 0.0, vel = 0.0, worst = 0.0;
    for (int step = 0; step < 3; ++step) {
      num::Gradients g(store);
      g[0][0] = store.value(0)[0];  // f = theta^2 / 2
      rmsprop_step(store, g, state);
      const double grad = theta;
      acc = 0.9 * acc + 0.1 * grad * grad;
      vel = 0.9 * vel + 0.001 * grad / std::sqrt(acc + 1e-8);
      theta -= vel;
      worst = std::max(worst, std::abs(theta - store.value(0)[0]));
    }
    all.push_back({"rmsprop/scalar-reference", worst, 1e-12, worst <= 1e-12});
  }

  {
    const double x[] = {3, 4, 5}, y[] = {2, 2, 2};
    const auto r = paired_ttest_2tailed(x, y);
    const double err = std::max(std::abs(r.t - std::sqrt(12.0)), std::abs(r.p - integrated_p(r.t, 2)));
    all.push_back({"ttest/integrated-density", err, 1e-6, err <= 1e-6});
  }

  {
    double worst = 0.0;
    for (const auto& spec : PromptTable::asap().all()) {
      for (int s = spec.min_score; s <= spec.max_score; ++s) {
        worst = std::max(worst, static_cast<double>(std::abs(denormalize_score(normalize_score(s, spec), spec) - s)));
      }
    }
    all.push_back({"normalize/round-trip", worst, 0.0, worst == 0.0});
  }

  bool ok = true;
  for (const auto& r : all) {
    ok = ok && r.passed;
    out << (r.passed ? "ok   " : "FAIL ") << std::left << std::setw(32) << r.name << " " << std::scientific
        << std::setprecision(3) << r.value << " (limit " << r.limit << ")\n"
        << std::defaultfloat;
  }
  out << (ok ? "selftest passed" : "selftest FAILED") << '\n';
  return ok;
}

}  // namespace gazeaeg
