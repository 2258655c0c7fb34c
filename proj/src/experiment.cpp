#include "gazeaeg/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "gazeaeg/error.hpp"

namespace gazeaeg {

std::string_view to_string(RunMode mode) { return mode == RunMode::Gaze ? "gaze" : "nogaze"; }

RunMode parse_run_mode(std::string_view name) {
  if (name == "gaze") return RunMode::Gaze;
  if (name == "nogaze") return RunMode::NoGaze;
  throw ConfigError("config must be 'gaze' or 'nogaze', got '" + std::string(name) + "'");
}

std::string_view to_string(FoldScheme scheme) {
  return scheme == FoldScheme::PooledEssays ? "pooled-essays" : "held-out-prompt";
}

FoldScheme parse_fold_scheme(std::string_view name) {
  if (name == "pooled-essays") return FoldScheme::PooledEssays;
  if (name == "held-out-prompt") return FoldScheme::HeldOutPrompt;
  throw ConfigError("fold_scheme must be 'pooled-essays' or 'held-out-prompt', got '" + std::string(name) + "'");
}

nlohmann::json to_json(const SplitPlan& plan) {
  auto folds = nlohmann::json::array();
  for (const auto& f : plan.folds) folds.push_back({{"train", f.train}, {"dev", f.dev}});
  return {{"target_prompt", plan.target_prompt},
          {"seed", plan.seed},
          {"scheme", std::string(to_string(plan.scheme))},
          {"folds", folds},
          {"test", plan.test}};
}

SplitPlan split_plan_from_json(const nlohmann::json& doc) {
  SplitPlan plan;
  try {
    plan.target_prompt = doc.at("target_prompt").get<int>();
    plan.seed = doc.at("seed").get<std::uint64_t>();
    plan.scheme = parse_fold_scheme(doc.at("scheme").get<std::string>());
    for (const auto& f : doc.at("folds")) {
      plan.folds.push_back({f.at("train").get<std::vector<std::int64_t>>(), f.at("dev").get<std::vector<std::int64_t>>()});
    }
    plan.test = doc.at("test").get<std::vector<std::int64_t>>();
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed split plan: ") + ex.what());
  }
  return plan;
}

SplitPlan make_zero_shot_splits(std::span<const Essay> corpus, int target_prompt, std::uint64_t seed,
                                FoldScheme scheme) {
  std::set<int> prompts;
  for (const auto& e : corpus) prompts.insert(e.prompt_id);
  if (!prompts.contains(target_prompt)) {
    throw ConfigError("target prompt " + std::to_string(target_prompt) + " has no essays in the corpus");
  }
  if (prompts.size() < 2) throw ConfigError("zero-shot splits need essays from at least two prompts");

  SplitPlan plan;
  plan.target_prompt = target_prompt;
  plan.seed = seed;
  plan.scheme = scheme;
  std::vector<std::int64_t> pool;
  for (const auto& e : corpus) {
    (e.prompt_id == target_prompt ? plan.test : pool).push_back(e.essay_id);
  }

  if (scheme == FoldScheme::PooledEssays) {
    if (pool.size() < kFoldCount) {
      throw ConfigError("only " + std::to_string(pool.size()) + " non-target essays; need at least " +
                        std::to_string(kFoldCount));
    }
    Rng rng(derive_seed(seed, 0x5B117ULL, static_cast<std::uint64_t>(target_prompt)));
    rng.shuffle(pool.begin(), pool.end());
    std::vector<std::size_t> part(pool.size());
    for (std::size_t p = 0, start = 0; p < kFoldCount; ++p) {
      const auto size = pool.size() / kFoldCount + (p < pool.size() % kFoldCount ? 1 : 0);
      std::fill_n(part.begin() + static_cast<std::ptrdiff_t>(start), size, p);
      start += size;
    }
    for (std::size_t f = 0; f < kFoldCount; ++f) {
      Fold fold;
      for (std::size_t i = 0; i < pool.size(); ++i) (part[i] == f ? fold.dev : fold.train).push_back(pool[i]);
      plan.folds.push_back(std::move(fold));
    }
  } else {
    std::vector<int> others;
    for (int p : prompts) {
      if (p != target_prompt) others.push_back(p);
    }
    if (others.size() < 2) throw ConfigError("held-out-prompt folds need at least two non-target prompts");
    for (std::size_t f = 0; f < kFoldCount; ++f) {
      const int dev_prompt = others[f % others.size()];
      Fold fold;
      for (const auto& e : corpus) {
        if (e.prompt_id == target_prompt) continue;
        (e.prompt_id == dev_prompt ? fold.dev : fold.train).push_back(e.essay_id);
      }
      plan.folds.push_back(std::move(fold));
    }
  }
  return plan;
}

std::size_t count_zero_shot_violations(const SplitPlan& plan, std::span<const Essay> corpus) {
  std::unordered_map<std::int64_t, int> prompt_of;
  for (const auto& e : corpus) prompt_of[e.essay_id] = e.prompt_id;
  const auto is_target = [&](std::int64_t id) {
    const auto it = prompt_of.find(id);
    return it == prompt_of.end() || it->second == plan.target_prompt;
  };
  std::size_t violations = 0;
  for (const auto& fold : plan.folds) {
    const std::unordered_set<std::int64_t> dev(fold.dev.begin(), fold.dev.end());
    for (auto id : fold.train) violations += (is_target(id) ? 1 : 0) + (dev.contains(id) ? 1 : 0);
    for (auto id : fold.dev) violations += is_target(id) ? 1 : 0;
  }
  for (auto id : plan.test) {
    const auto it = prompt_of.find(id);
    violations += (it == prompt_of.end() || it->second != plan.target_prompt) ? 1 : 0;
  }
  return violations;
}

nlohmann::json describe(const ExperimentConfig& c, RunMode mode) {
  auto model = to_json(c.train.model);
  model["gaze_enabled"] = mode == RunMode::Gaze;
  return {{"model", model},
          {"train",
           {{"batch_size", c.train.batch_size},
            {"epochs", c.train.epochs},
            {"lr", c.train.optimizer.lr},
            {"rho", c.train.optimizer.rho},
            {"momentum", c.train.optimizer.momentum},
            {"epsilon", c.train.optimizer.epsilon},
            {"grad_clip", c.train.grad_clip},
            {"lr_decay", c.train.lr_decay},
            {"grad_shards", c.train.grad_shards},
            {"batch_reduction", "mean"}}},
          {"encoding", {{"max_sentences", c.limits.max_sentences}, {"max_tokens", c.limits.max_tokens}}},
          {"min_count", c.min_count},
          {"gaze_bins", c.gaze_bins},
          {"gaze_binning", "per-reader quantile"},
          {"gaze_reader_aggregation", "mean"},
          {"embeddings", c.embeddings ? c.embeddings->filename().string() : std::string("random-uniform-0.05")},
          {"fold_scheme", std::string(to_string(c.scheme))},
          {"dev_qwk", "mean over dev prompts"},
          {"score_rounding", "half-away-from-zero, clamped"},
          {"significance_pairing", "fold"}};
}

namespace {

nlohmann::json to_json(const FoldReport& f) {
  auto preds = nlohmann::json::array();
  for (const auto& p : f.predictions) {
    preds.push_back({{"essay_id", p.essay_id}, {"gold", p.gold}, {"pred", p.pred}, {"unit", p.unit}});
  }
  auto history = nlohmann::json::array();
  for (const auto& h : f.history) history.push_back(to_json(h, false));
  return {{"fold", f.fold},         {"best_epoch", f.best_epoch}, {"dev_qwk", f.dev_qwk},
          {"test_qwk", f.test_qwk}, {"vocab_size", f.vocab_size}, {"history", history},
          {"predictions", preds}};
}

FoldReport fold_report_from_json(const nlohmann::json& j) {
  FoldReport f;
  f.fold = j.at("fold").get<std::size_t>();
  f.best_epoch = j.at("best_epoch").get<std::size_t>();
  f.dev_qwk = j.at("dev_qwk").get<double>();
  f.test_qwk = j.at("test_qwk").get<double>();
  f.vocab_size = j.at("vocab_size").get<std::size_t>();
  for (const auto& h : j.at("history")) f.history.push_back(epoch_record_from_json(h));
  for (const auto& p : j.at("predictions")) {
    f.predictions.push_back({p.at("essay_id").get<std::int64_t>(), p.at("gold").get<int>(), p.at("pred").get<int>(),
                             p.at("unit").get<double>()});
  }
  return f;
}

// nlohmann writes infinities as null.
double number_or_inf(const nlohmann::json& j, double sign_source) {
  if (j.is_null()) return std::copysign(std::numeric_limits<double>::infinity(), sign_source);
  return j.get<double>();
}

}  // namespace

nlohmann::json to_json(const ExperimentReport& r) {
  auto folds = nlohmann::json::array();
  for (const auto& f : r.folds) folds.push_back(to_json(f));
  nlohmann::json j = {{"target_prompt", r.target_prompt},
                      {"config", std::string(to_string(r.mode))},
                      {"seed", r.seed},
                      {"settings", r.settings},
                      {"folds", folds},
                      {"mean_test_qwk", r.mean_test_qwk}};
  if (r.significance) {
    j["significance"] = {{"t", r.significance->t}, {"p", r.significance->p}, {"starred", r.significance->starred}};
  }
  return j;
}

ExperimentReport experiment_report_from_json(const nlohmann::json& j) {
  ExperimentReport r;
  try {
    r.target_prompt = j.at("target_prompt").get<int>();
    r.mode = parse_run_mode(j.at("config").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.settings = j.at("settings");
    for (const auto& f : j.at("folds")) r.folds.push_back(fold_report_from_json(f));
    r.mean_test_qwk = j.at("mean_test_qwk").get<double>();
    if (j.contains("significance")) {
      const auto& s = j.at("significance");
      r.significance = Significance{number_or_inf(s.at("t"), 1.0), s.at("p").get<double>(), s.at("starred").get<bool>()};
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed experiment report: ") + ex.what());
  }
  return r;
}

double mean_test_qwk(std::span<const FoldReport> folds) {
  if (folds.empty()) return 0.0;
  double total = 0.0;
  for (const auto& f : folds) total += f.test_qwk;
  return total / static_cast<double>(folds.size());
}

FoldReport evaluate_fold(const ModelParams& params, const Vocabulary& vocab, std::span<const Essay> test,
                         const PromptSpec& target, const EncodingLimits& limits, const PromptTable& specs) {
  if (test.empty()) throw ConfigError("empty test set for prompt " + std::to_string(target.prompt_id));
  std::vector<EncodedEssay> encoded;
  encoded.reserve(test.size());
  for (const auto& e : test) encoded.push_back(encode_essay(e, vocab, specs, limits));
  const auto units = predict_scores(params, encoded);
  FoldReport report;
  report.vocab_size = vocab.size();
  std::vector<int> gold, pred;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int p = denormalize_score(units[i], target);
    report.predictions.push_back({test[i].essay_id, test[i].gold_score, p, units[i]});
    gold.push_back(test[i].gold_score);
    pred.push_back(p);
  }
  report.test_qwk = qwk(gold, pred, target.min_score, target.max_score);
  return report;
}

ExperimentReport run_experiment(std::span<const Essay> corpus, const GazeLabelMap* gaze_labels, int target_prompt,
                                RunMode mode, const ExperimentConfig& config, std::uint64_t seed,
                                const PromptTable& specs, const RunHooks& hooks) {
  if (mode == RunMode::Gaze && (gaze_labels == nullptr || gaze_labels->empty())) {
    throw ConfigError("the gaze configuration needs gaze labels");
  }
  const auto& target = specs.at(target_prompt);
  const auto plan = make_zero_shot_splits(corpus, target_prompt, seed, config.scheme);
  if (const auto bad = count_zero_shot_violations(plan, corpus); bad != 0) {
    throw ContractError("split plan leaks the target prompt (" + std::to_string(bad) + " violations)");
  }

  std::unordered_map<std::int64_t, const Essay*> by_id;
  for (const auto& e : corpus) by_id[e.essay_id] = &e;
  const auto gather = [&](const std::vector<std::int64_t>& ids) {
    std::vector<Essay> out;
    out.reserve(ids.size());
    for (auto id : ids) out.push_back(*by_id.at(id));
    return out;
  };
  const auto test = gather(plan.test);

  ExperimentReport report;
  report.target_prompt = target_prompt;
  report.mode = mode;
  report.seed = seed;
  report.settings = describe(config, mode);

  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto train = gather(plan.folds[f].train);
    const auto dev = gather(plan.folds[f].dev);
    const auto vocab = build_vocab(train, config.min_count);
    const auto embed_seed = derive_seed(seed, f, 0xE3BEDULL);
    const auto embeddings = config.embeddings
                                ? load_embeddings(*config.embeddings, vocab, config.train.model.embed_dim, embed_seed)
                                : random_embeddings(vocab, config.train.model.embed_dim, embed_seed);

    TrainConfig tc = config.train;
    tc.model.gaze_enabled = mode == RunMode::Gaze;
    tc.seed = derive_seed(seed, f);

    std::vector<EncodedEssay> train_enc, dev_enc;
    for (const auto& e : train) {
      auto enc = encode_essay(e, vocab, specs, config.limits);
      if (mode == RunMode::Gaze && gaze_labels->contains(e.essay_id)) enc.gaze = align_gaze(*gaze_labels, enc);
      train_enc.push_back(std::move(enc));
    }
    for (const auto& e : dev) dev_enc.push_back(encode_essay(e, vocab, specs, config.limits));

    auto initial = init_params(tc.model, embeddings, derive_seed(seed, f, 0x1417ULL));
    EpochObserver observer;
    if (hooks.on_epoch) observer = [&, f](const EpochRecord& r) { hooks.on_epoch(f, r); };
    auto trained = train_fold(train_enc, dev_enc, std::move(initial), tc, specs, observer);

    auto fold_report = evaluate_fold(trained.best_params, vocab, test, target, config.limits, specs);
    fold_report.fold = f;
    fold_report.best_epoch = trained.best_epoch;
    fold_report.dev_qwk = trained.best_dev_qwk;
    fold_report.history = trained.history;
    if (hooks.on_fold) hooks.on_fold(f, vocab, trained, fold_report);
    report.folds.push_back(std::move(fold_report));
  }
  report.mean_test_qwk = mean_test_qwk(report.folds);
  return report;
}

namespace {

std::vector<double> fold_qwks(const ExperimentReport& r) {
  std::vector<double> v;
  for (const auto& f : r.folds) v.push_back(f.test_qwk);
  return v;
}

TTestResult safe_ttest(std::span<const double> x, std::span<const double> y) {
  try {
    return paired_ttest_2tailed(x, y);
  } catch (const DomainError&) {
    // Constant nonzero difference across folds.
    const double sign = x[0] - y[0];
    return {std::copysign(std::numeric_limits<double>::infinity(), sign), 0.0};
  }
}

void check_pair(const ExperimentReport& gaze, const ExperimentReport& nogaze) {
  if (gaze.mode != RunMode::Gaze || nogaze.mode != RunMode::NoGaze) {
    throw ComparisonError("expected one gaze and one nogaze report");
  }
  if (gaze.target_prompt != nogaze.target_prompt) {
    throw ComparisonError("reports target different prompts (" + std::to_string(gaze.target_prompt) + " vs " +
                          std::to_string(nogaze.target_prompt) + ")");
  }
  if (gaze.seed != nogaze.seed) throw ComparisonError("reports were produced with different seeds");
  if (gaze.folds.size() != nogaze.folds.size() || gaze.folds.size() < 2) {
    throw ComparisonError("reports must have the same number (>= 2) of folds");
  }
}

}  // namespace

ComparisonRow compare_and_report(const ExperimentReport& gaze, const ExperimentReport& nogaze) {
  check_pair(gaze, nogaze);
  ComparisonRow row;
  row.target_prompt = gaze.target_prompt;
  row.gaze_qwk = gaze.mean_test_qwk;
  row.nogaze_qwk = nogaze.mean_test_qwk;
  const auto x = fold_qwks(gaze);
  const auto y = fold_qwks(nogaze);
  row.test = safe_ttest(x, y);
  row.starred = row.test.p < 0.05;
  return row;
}

ComparisonTable build_comparison(std::span<const ExperimentReport> gaze, std::span<const ExperimentReport> nogaze) {
  if (gaze.empty() || gaze.size() != nogaze.size()) {
    throw ComparisonError("need the same, nonzero number of gaze and nogaze reports");
  }
  std::map<int, const ExperimentReport*> nogaze_by_target;
  for (const auto& r : nogaze) {
    if (!nogaze_by_target.emplace(r.target_prompt, &r).second) {
      throw ComparisonError("two nogaze reports for prompt " + std::to_string(r.target_prompt));
    }
  }
  ComparisonTable table;
  std::vector<double> all_gaze, all_nogaze;
  for (const auto& g : gaze) {
    const auto it = nogaze_by_target.find(g.target_prompt);
    if (it == nogaze_by_target.end()) {
      throw ComparisonError("no nogaze report for prompt " + std::to_string(g.target_prompt));
    }
    table.rows.push_back(compare_and_report(g, *it->second));
    for (const auto& f : g.folds) all_gaze.push_back(f.test_qwk);
    for (const auto& f : it->second->folds) all_nogaze.push_back(f.test_qwk);
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [](const auto& a, const auto& b) { return a.target_prompt < b.target_prompt; });
  for (const auto& r : table.rows) {
    table.mean.gaze_qwk += r.gaze_qwk;
    table.mean.nogaze_qwk += r.nogaze_qwk;
  }
  table.mean.gaze_qwk /= static_cast<double>(table.rows.size());
  table.mean.nogaze_qwk /= static_cast<double>(table.rows.size());
  table.mean.test = safe_ttest(all_gaze, all_nogaze);
  table.mean.starred = table.mean.test.p < 0.05;
  return table;
}

std::string format_row(const ComparisonRow& row) {
  const std::string label = row.target_prompt == 0 ? "Mean QWK" : "Prompt " + std::to_string(row.target_prompt);
  const bool gaze_better = row.gaze_qwk >= row.nogaze_qwk;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%s | %.3f%s | %.3f%s", label.c_str(), row.nogaze_qwk,
                row.starred && !gaze_better ? "*" : "", row.gaze_qwk, row.starred && gaze_better ? "*" : "");
  return buf;
}

std::string render_table(const ComparisonTable& table) {
  std::ostringstream out;
  out << "QWK without (plain) and with (gaze) gaze auxiliary tasks; * p < 0.05, two-tailed paired t-test over folds\n";
  out << "Target   | plain | gaze\n";
  out << "---------+-------+-------\n";
  for (const auto& r : table.rows) out << format_row(r) << '\n';
  out << "---------+-------+-------\n";
  out << format_row(table.mean) << '\n';
  return out.str();
}

nlohmann::json to_json(const ComparisonTable& table) {
  const auto row_json = [](const ComparisonRow& r) {
    return nlohmann::json{{"target_prompt", r.target_prompt}, {"nogaze_qwk", r.nogaze_qwk}, {"gaze_qwk", r.gaze_qwk},
                          {"t", r.test.t},  {"p", r.test.p}, {"starred", r.starred}, {"row", format_row(r)}};
  };
  auto rows = nlohmann::json::array();
  for (const auto& r : table.rows) rows.push_back(row_json(r));
  return {{"rows", rows}, {"mean", row_json(table.mean)}, {"pairing", "fold"}};
}

}  // namespace gazeaeg
