// Prints one PASS/FAIL/SKIP line per acceptance criterion; exits nonzero if
// any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "gazeaeg/error.hpp"
#include "gazeaeg/experiment.hpp"
#include "gazeaeg/run_store.hpp"
#include "gazeaeg/selftest.hpp"
#include "gazeaeg/synthetic.hpp"
#include "support.hpp"

using namespace gazeaeg;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Verdict {
  Outcome outcome;
  std::string detail;
};

Verdict fail(std::string d) { return {Outcome::Fail, std::move(d)}; }
Verdict verdict(bool ok, std::string d) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(d)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Verdict gradients() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string failed;
  for (const auto& c : op_gradient_checks(1e-4)) {
    worst = std::max(worst, c.value);
    if (!c.passed) failed += " " + c.name;
  }
  const auto essay = toy_essay();
  if (essay.active_sentences() != 2) return fail("toy essay does not have two sentences");
  for (bool gaze : {false, true}) {
    for (auto pooling : {WordPooling::Attention, WordPooling::Mean}) {
      const double err = network_gradient_error(toy_model_config(gaze, pooling), essay, 5);
      worst = std::max(worst, err);
      if (!(err <= 1e-4)) failed += fmt(" network/%d/%s", gaze, std::string(to_string(pooling)).c_str());
    }
  }
  const double t = seconds_since(start);
  return verdict(failed.empty() && t < 30.0, fmt("max rel err %.2e, %.2f s%s", worst, t, failed.c_str()));
}

Verdict qwk_oracle() {
  using Ints = std::vector<int>;
  const bool examples = qwk(Ints{0, 1, 2}, Ints{0, 1, 2}, 0, 2) == 1.0 && qwk(Ints{0, 2}, Ints{2, 0}, 0, 2) == -1.0 &&
                        qwk(Ints{0, 1, 2}, Ints{1, 1, 1}, 0, 2) == 0.0;
  Rng rng(20240601);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int lo = static_cast<int>(rng.below(10));
    const int hi = lo + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(60 - lo)));
    const auto n = 2 + rng.below(199);
    Ints g(n), p(n);
    const auto width = static_cast<std::uint64_t>(hi - lo + 1);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = lo + static_cast<int>(rng.below(width));
      p[i] = rng.bernoulli(0.6) ? std::clamp(g[i] + static_cast<int>(rng.below(3)) - 1, lo, hi)
                                : lo + static_cast<int>(rng.below(width));
    }
    worst = std::max(worst, std::abs(qwk(g, p, lo, hi) - support::confusion_qwk(g, p, lo, hi)));
  }
  return verdict(examples && worst <= 1e-12, fmt("examples %s, max |diff| %.1e over 1000 pairs",
                                                 examples ? "exact" : "WRONG", worst));
}

Verdict optimizer() {
  num::ParamStore store;
  store.add("theta", num::Tensor::scalar(0.0));
  OptimState state(store, {});
  num::Gradients g(store);
  g[0][0] = 1.0;
  rmsprop_step(store, g, state);
  const double one = store.value(0)[0];

  // f(theta) = theta^2 / 2, so the gradient is theta.
  store.value(0)[0] = 1.3;
  OptimState fresh(store, {});
  support::ScalarRmsProp ref;
  double theta = 1.3, worst = 0.0;
  for (int step = 0; step < 3; ++step) {
    g[0][0] = store.value(0)[0];
    rmsprop_step(store, g, fresh);
    theta = ref.step(theta, g[0][0]);
    worst = std::max(worst, std::abs(store.value(0)[0] - theta));
  }
  return verdict(std::abs(one + 0.0031623) < 1e-7 && worst <= 1e-12,
                 fmt("one step %.7f, 3-step max |diff| %.1e", one, worst));
}

Verdict normalization() {
  std::size_t checked = 0, bad = 0;
  for (const auto& spec : PromptTable::asap().all()) {
    for (int s = spec.min_score; s <= spec.max_score; ++s) {
      ++checked;
      if (denormalize_score(normalize_score(s, spec), spec) != s) ++bad;
    }
  }
  return verdict(bad == 0 && checked > 0, fmt("%zu scores over 8 prompts, %zu mismatches", checked, bad));
}

Verdict purity() {
  SyntheticCorpusOptions o;
  o.prompts = {1, 2, 3, 4, 5, 6, 7, 8};
  o.essays_per_prompt = 40;
  const auto corpus = make_synthetic_corpus(o);
  std::size_t violations = 0, folds = 0;
  for (int target = 1; target <= 8; ++target) {
    const auto plan = make_zero_shot_splits(corpus, target, 1);
    violations += count_zero_shot_violations(plan, corpus);
    // Independent recount: no train or dev id may belong to the target.
    std::set<std::int64_t> target_ids;
    for (const auto& e : corpus) {
      if (e.prompt_id == target) target_ids.insert(e.essay_id);
    }
    for (const auto& f : plan.folds) {
      ++folds;
      for (auto id : f.train) violations += target_ids.contains(id);
      for (auto id : f.dev) violations += target_ids.contains(id);
    }
  }
  return verdict(violations == 0 && folds == 40, fmt("%zu folds, %zu violations", folds, violations));
}

Verdict loss_composition() {
  const auto essay = toy_essay();
  const auto cfg = toy_model_config(true);
  auto params = init_params(cfg, num::Tensor({64, cfg.embed_dim}, 0.02), 3);
  const std::array<double, 5> gaze{0.15, 0.4, 0.55, 0.7, 0.9};
  support::force_constant_heads(params, 0.62, gaze);
  num::Tape tape;
  Rng rng(1);
  const auto fwd = forward(tape, params, essay, false, rng);
  const auto loss = multitask_loss(tape, fwd, essay, cfg);
  const double weights[] = {0.05, 0.05, 0.01, 0.01, 0.1};
  double expected = (0.62 - essay.target) * (0.62 - essay.target);
  for (std::size_t a = 0; a < 5; ++a) expected += weights[a] * support::constant_gaze_mse(essay, a, gaze[a]);
  const double diff = std::abs(loss.total_value - expected);
  return verdict(loss.has_gaze && diff <= 1e-12, fmt("loss %.12f, oracle %.12f, |diff| %.1e", loss.total_value,
                                                      expected, diff));
}

Verdict synthetic_learning() {
  const auto start = std::chrono::steady_clock::now();
  const auto corpus = make_synthetic_corpus({});  // 4 prompts x 200 essays
  const auto labels = bin_and_scale(synth_gaze_corpus(corpus, 1, 48), 5);
  const ExperimentConfig cfg;  // default hyperparameters
  const int target = 1;
  const std::uint64_t seed = 1;

  std::vector<nlohmann::json> vocab[2];
  std::vector<std::vector<EpochRecord>> history[2];
  RunHooks hooks[2];
  for (int m = 0; m < 2; ++m) {
    hooks[m].on_fold = [&, m](std::size_t, const Vocabulary& v, const FoldTraining& t, const FoldReport&) {
      vocab[m].push_back(v.to_json());
      history[m].push_back(t.history);
    };
  }
  const auto nogaze = run_experiment(corpus, nullptr, target, RunMode::NoGaze, cfg, seed, PromptTable::asap(), hooks[0]);
  const auto gazed = run_experiment(corpus, &labels, target, RunMode::Gaze, cfg, seed, PromptTable::asap(), hooks[1]);
  const double t = seconds_since(start);

  bool loss_down = true, finite = true, gaze_used = true;
  for (const auto& h : history[0]) loss_down = loss_down && h.size() == 50 && h.back().train_loss < h.front().train_loss;
  for (const auto& h : history[1]) {
    for (const auto& r : h) {
      finite = finite && std::isfinite(r.train_loss);
      for (double g : r.gaze_loss) finite = finite && std::isfinite(g);
    }
    gaze_used = gaze_used && !h.empty() && h.front().gaze_essays > 0;
  }
  bool same_splits = vocab[0] == vocab[1] && nogaze.folds.size() == gazed.folds.size();
  for (std::size_t f = 0; same_splits && f < nogaze.folds.size(); ++f) {
    const auto& a = nogaze.folds[f].predictions;
    const auto& b = gazed.folds[f].predictions;
    same_splits = a.size() == b.size();
    for (std::size_t i = 0; same_splits && i < a.size(); ++i) same_splits = a[i].essay_id == b[i].essay_id;
  }
  const bool ok = nogaze.mean_test_qwk >= 0.5 && loss_down && finite && gaze_used && same_splits && t < 1200.0;
  return verdict(ok, fmt("target %d: nogaze QWK %.3f, gaze QWK %.3f, loss falls %s, gaze finite %s, "
                         "same splits %s, %.0f s",
                         target, nogaze.mean_test_qwk, gazed.mean_test_qwk, loss_down ? "yes" : "no",
                         finite && gaze_used ? "yes" : "no", same_splits ? "yes" : "no", t));
}

Verdict ttest() {
  const std::vector<double> x{1, 2, 3}, zero{0, 0, 0};
  const auto r = paired_ttest_2tailed(x, zero);
  const auto back = paired_ttest_2tailed(zero, x);
  const auto null = paired_ttest_2tailed(x, x);
  const double oracle = support::integrated_t_pvalue(r.t, 2);
  const bool ok = std::abs(r.t - 3.4641) < 1e-4 && std::abs(r.p - 0.0742) <= 1e-3 && std::abs(r.p - oracle) <= 1e-6 &&
                  back.t == -r.t && back.p == r.p && null.t == 0.0 && null.p == 1.0;
  return verdict(ok, fmt("t %.4f, p %.4f, integrated p %.4f", r.t, r.p, oracle));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  const auto root = std::filesystem::temp_directory_path() / "gazeaeg_acceptance_determinism";
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root);
  SyntheticCorpusOptions o;
  o.essays_per_prompt = 25;
  const auto corpus = make_synthetic_corpus(o);
  write_corpus_json(root / "corpus.json", corpus);
  write_gaze_tsv(root / "gaze.tsv", synth_gaze_corpus(corpus, 2, 20));

  RunRequest req;
  req.corpus = root / "corpus.json";
  req.gaze = root / "gaze.tsv";
  req.target_prompt = 2;
  req.mode = RunMode::Gaze;
  req.seed = 42;
  req.config.train.epochs = 3;
  req.config.train.batch_size = 20;
  req.config.train.model.cnn_filters = 20;
  req.config.train.model.lstm_hidden = 16;
  req.config.train.model.attention_dim = 16;
  req.config.train.threads = 1;
  train_run(req, root / "a");
  req.config.train.threads = 0;
  train_run(req, root / "b");
  const auto a = slurp(root / "a" / "report.json");
  const auto b = slurp(root / "b" / "report.json");
  const auto again = to_json(evaluate_run(root / "a")).dump();
  const bool ok = !a.empty() && a == b && to_json(read_report(root / "a" / "report.json")).dump() == again;
  std::filesystem::remove_all(root);
  return verdict(ok, fmt("report.json %zu bytes, runs %s", a.size(), a == b ? "byte-identical" : "DIFFER"));
}

Verdict full_data() {
  const char* path = std::getenv("GAZEAEG_ASAP_TSV");
  if (path == nullptr || *path == '\0') return {Outcome::Skip, "set GAZEAEG_ASAP_TSV to the ASAP training TSV"};
  const auto corpus = load_asap_tsv(path);
  ExperimentConfig cfg;
  if (const char* e = std::getenv("GAZEAEG_ASAP_EPOCHS")) cfg.train.epochs = std::stoul(e);
  if (const char* e = std::getenv("GAZEAEG_EMBEDDINGS")) cfg.embeddings = e;
  double total = 0.0;
  std::string per_prompt;
  for (int target = 1; target <= 8; ++target) {
    const auto r = run_experiment(corpus, nullptr, target, RunMode::NoGaze, cfg, 1);
    total += r.mean_test_qwk;
    per_prompt += fmt(" %.3f", r.mean_test_qwk);
  }
  const double mean = total / 8.0;
  return verdict(mean > 0.30, fmt("%zu essays, %zu epochs, mean nogaze QWK %.3f (per prompt:%s)", corpus.size(),
                                  cfg.train.epochs, mean, per_prompt.c_str()));
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Verdict()>> criteria[] = {
      {"gradient correctness", gradients},
      {"qwk oracle equivalence", qwk_oracle},
      {"optimizer correctness", optimizer},
      {"score normalization round trip", normalization},
      {"zero-shot purity", purity},
      {"multi-task loss composition", loss_composition},
      {"multi-task learning on synthetic data", synthetic_learning},
      {"paired t-test oracle", ttest},
      {"end-to-end determinism", determinism},
      {"full-data directional check", full_data},
  };
  int failures = 0;
  int n = 0;
  for (const auto& [name, run] : criteria) {
    ++n;
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const char* tag = v.outcome == Outcome::Pass ? "PASS" : v.outcome == Outcome::Fail ? "FAIL" : "SKIP";
    failures += v.outcome == Outcome::Fail;
    std::cout << "[" << tag << "] " << n << ". " << name << ": " << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
