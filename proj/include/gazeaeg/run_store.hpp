#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "gazeaeg/experiment.hpp"

namespace gazeaeg {

// Flat "key = value" config text. Blank lines and lines starting with '#'
// are ignored; unknown keys and malformed values raise ConfigError with the
// line number. Keys not given keep their defaults.
ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig read_config_file(const std::filesystem::path& path, ExperimentConfig base = {});
// Every key, in a stable order, so the output parses back to `config`.
std::string config_to_text(const ExperimentConfig& config);

struct RunRequest {
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> gaze;
  int target_prompt = 0;
  RunMode mode = RunMode::NoGaze;
  std::uint64_t seed = 1;
  ExperimentConfig config{};
};

// Trains all folds and writes the run directory:
//   run.json           request, resolved settings and the split plan
//   config.txt         resolved config
//   train_log.jsonl    one line per (fold, epoch), with wall time
//   fold_K/vocab.json, fold_K/params.json, fold_K/history.json
//   report.json        the ExperimentReport
// Progress lines go to `log` when it is not null.
ExperimentReport train_run(const RunRequest& request, const std::filesystem::path& out_dir,
                           std::ostream* log = nullptr);

// Rebuilds the report of a finished run from its stored checkpoints.
ExperimentReport evaluate_run(const std::filesystem::path& run_dir);

void write_report(const std::filesystem::path& path, const ExperimentReport& report);
ExperimentReport read_report(const std::filesystem::path& path);

// Accepts either a run directory (reads report.json inside it) or a report file.
ExperimentReport load_report(const std::filesystem::path& run_or_report);

}  // namespace gazeaeg
