#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazeaeg/dataset.hpp"
#include "gazeaeg/evaluation.hpp"
#include "gazeaeg/gaze.hpp"
#include "gazeaeg/textprep.hpp"
#include "gazeaeg/training.hpp"

namespace gazeaeg {

inline constexpr std::size_t kFoldCount = 5;

enum class RunMode { NoGaze, Gaze };
std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view name);

// PooledEssays: the non-target essays are shuffled and cut into five dev
// parts. HeldOutPrompt: fold i uses one whole non-target prompt as dev.
enum class FoldScheme { PooledEssays, HeldOutPrompt };
std::string_view to_string(FoldScheme scheme);
FoldScheme parse_fold_scheme(std::string_view name);

struct Fold {
  std::vector<std::int64_t> train;
  std::vector<std::int64_t> dev;
  bool operator==(const Fold&) const = default;
};

struct SplitPlan {
  int target_prompt = 0;
  std::vector<Fold> folds;
  std::vector<std::int64_t> test;
  std::uint64_t seed = 0;
  FoldScheme scheme = FoldScheme::PooledEssays;
  bool operator==(const SplitPlan&) const = default;
};

nlohmann::json to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const nlohmann::json& doc);

SplitPlan make_zero_shot_splits(std::span<const Essay> corpus, int target_prompt, std::uint64_t seed,
                                FoldScheme scheme = FoldScheme::PooledEssays);

// Number of (fold, essay) pairs where a target-prompt essay sits in a train
// or dev set, plus train/dev overlaps. Zero for a valid plan.
std::size_t count_zero_shot_violations(const SplitPlan& plan, std::span<const Essay> corpus);

struct ExperimentConfig {
  TrainConfig train{};
  EncodingLimits limits{};
  std::size_t min_count = 1;
  std::size_t gaze_bins = 5;
  std::optional<std::filesystem::path> embeddings;
  FoldScheme scheme = FoldScheme::PooledEssays;
};

// Every setting that influences a run, including the choices the method
// leaves open, for the report and the run directory.
nlohmann::json describe(const ExperimentConfig& config, RunMode mode);

struct TestPrediction {
  std::int64_t essay_id = 0;
  int gold = 0;
  int pred = 0;
  double unit = 0.0;
  bool operator==(const TestPrediction&) const = default;
};

struct FoldReport {
  std::size_t fold = 0;
  std::size_t best_epoch = 0;
  double dev_qwk = 0.0;
  double test_qwk = 0.0;
  std::size_t vocab_size = 0;
  std::vector<TestPrediction> predictions;
  std::vector<EpochRecord> history;
};

struct Significance {
  double t = 0.0;
  double p = 1.0;
  bool starred = false;
};

struct ExperimentReport {
  int target_prompt = 0;
  RunMode mode = RunMode::NoGaze;
  std::uint64_t seed = 0;
  nlohmann::json settings;
  std::vector<FoldReport> folds;
  double mean_test_qwk = 0.0;
  std::optional<Significance> significance;
};

nlohmann::json to_json(const ExperimentReport& report);
ExperimentReport experiment_report_from_json(const nlohmann::json& doc);
double mean_test_qwk(std::span<const FoldReport> folds);

// Rescaled predictions of `params` on the target prompt's essays.
FoldReport evaluate_fold(const ModelParams& params, const Vocabulary& vocab, std::span<const Essay> test,
                         const PromptSpec& target, const EncodingLimits& limits, const PromptTable& specs);

struct RunHooks {
  std::function<void(std::size_t fold, const EpochRecord&)> on_epoch;
  std::function<void(std::size_t fold, const Vocabulary&, const FoldTraining&, const FoldReport&)> on_fold;
};

// Leave-one-prompt-out cross-validation. Vocabulary, embeddings and
// parameters are built per fold from that fold's training essays only.
// Gaze and NoGaze runs with the same seed share splits and initial weights.
ExperimentReport run_experiment(std::span<const Essay> corpus, const GazeLabelMap* gaze_labels, int target_prompt,
                                RunMode mode, const ExperimentConfig& config, std::uint64_t seed,
                                const PromptTable& specs = PromptTable::asap(), const RunHooks& hooks = {});

struct ComparisonRow {
  int target_prompt = 0;  // 0 for the mean row
  double nogaze_qwk = 0.0;
  double gaze_qwk = 0.0;
  TTestResult test{};
  bool starred = false;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
  ComparisonRow mean;
};

// One target prompt: fold-paired t-test of Gaze against NoGaze test QWK.
ComparisonRow compare_and_report(const ExperimentReport& gaze, const ExperimentReport& nogaze);

// Rows for several targets plus a "Mean QWK" row whose test pairs every
// fold of every target.
ComparisonTable build_comparison(std::span<const ExperimentReport> gaze, std::span<const ExperimentReport> nogaze);

// "Prompt 4 | 0.548 | 0.626*": three decimals, the star marks the better
// column when p < 0.05.
std::string format_row(const ComparisonRow& row);
std::string render_table(const ComparisonTable& table);
nlohmann::json to_json(const ComparisonTable& table);

}  // namespace gazeaeg
