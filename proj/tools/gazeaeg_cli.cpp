#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "gazeaeg/error.hpp"
#include "gazeaeg/run_store.hpp"
#include "gazeaeg/selftest.hpp"
#include "gazeaeg/synthetic.hpp"

using namespace gazeaeg;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot essay scoring with gaze-behaviour auxiliary tasks"};
  app.require_subcommand(1);

  std::string essays, out;
  auto* prepare = app.add_subcommand("prepare", "Convert the ASAP training TSV into corpus JSON");
  prepare->add_option("--essays", essays, "ASAP training_set_rel3.tsv")->required()->check(CLI::ExistingFile);
  prepare->add_option("--out", out, "corpus JSON")->required();

  std::string corpus;
  std::uint64_t seed = 1;
  std::size_t count = 48, readers = 3;
  auto* synth_gaze_cmd = app.add_subcommand("synth-gaze", "Generate synthetic reading records for some essays");
  synth_gaze_cmd->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  synth_gaze_cmd->add_option("--seed", seed);
  synth_gaze_cmd->add_option("--essays", count, "number of essays to cover");
  synth_gaze_cmd->add_option("--readers", readers);
  synth_gaze_cmd->add_option("--out", out)->required();

  SyntheticCorpusOptions synth;
  auto* synth_corpus_cmd = app.add_subcommand("synth-corpus", "Generate a synthetic essay corpus");
  synth_corpus_cmd->add_option("--prompts", synth.prompts);
  synth_corpus_cmd->add_option("--essays-per-prompt", synth.essays_per_prompt);
  synth_corpus_cmd->add_option("--noise", synth.score_noise);
  synth_corpus_cmd->add_option("--seed", synth.seed);
  synth_corpus_cmd->add_option("--out", out)->required();

  RunRequest req;
  std::string gaze_path, mode = "nogaze", settings;
  auto* train = app.add_subcommand("train", "Run the five-fold zero-shot experiment for one target prompt");
  train->add_option("--corpus", corpus)->required()->check(CLI::ExistingFile);
  train->add_option("--gaze", gaze_path, "gaze TSV")->check(CLI::ExistingFile);
  train->add_option("--target-prompt", req.target_prompt)->required()->check(CLI::Range(1, 8));
  train->add_option("--config", mode, "gaze or nogaze")->check(CLI::IsMember({"gaze", "nogaze"}));
  train->add_option("--settings", settings, "key = value settings file")->check(CLI::ExistingFile);
  train->add_option("--seed", req.seed);
  train->add_option("--out", out, "run directory")->required();
  bool quiet = false;
  train->add_flag("--quiet", quiet);

  std::string run_dir;
  auto* evaluate = app.add_subcommand("evaluate", "Recompute a run's report from its checkpoints");
  evaluate->add_option("--run", run_dir)->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--out", out)->required();

  std::vector<std::string> gaze_runs, nogaze_runs;
  auto* compare = app.add_subcommand("compare", "Gaze vs. no-gaze table with paired t-tests");
  compare->add_option("--gaze-run", gaze_runs, "run directory or report.json (repeatable)")->required();
  compare->add_option("--nogaze-run", nogaze_runs, "run directory or report.json (repeatable)")->required();
  compare->add_option("--out", out, "table text; JSON goes next to it")->required();

  auto* selftest = app.add_subcommand("selftest", "Gradient checks and metric oracles");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prepare) {
      const auto parsed = load_asap_tsv(essays);
      write_corpus_json(out, parsed);
      for (const auto& [prompt, n] : count_by_prompt(parsed)) {
        std::cout << "prompt " << prompt << ": " << n << " essays\n";
      }
      std::cout << "total " << parsed.size() << " -> " << out << '\n';
    } else if (*synth_gaze_cmd) {
      const auto records = synth_gaze_corpus(read_corpus_json(corpus), seed, count, {readers});
      write_gaze_tsv(std::filesystem::path(out), records);
      std::cout << records.size() << " records -> " << out << '\n';
    } else if (*synth_corpus_cmd) {
      const auto made = make_synthetic_corpus(synth);
      write_corpus_json(out, made);
      std::cout << made.size() << " essays -> " << out << '\n';
    } else if (*train) {
      req.corpus = corpus;
      if (!gaze_path.empty()) req.gaze = gaze_path;
      req.mode = parse_run_mode(mode);
      if (!settings.empty()) req.config = read_config_file(settings);
      const auto report = train_run(req, out, quiet ? nullptr : &std::cerr);
      std::cout << "prompt " << report.target_prompt << " " << to_string(report.mode) << " mean test QWK "
                << report.mean_test_qwk << '\n';
    } else if (*evaluate) {
      const auto report = evaluate_run(run_dir);
      write_report(out, report);
      std::cout << "prompt " << report.target_prompt << " " << to_string(report.mode) << " mean test QWK "
                << report.mean_test_qwk << '\n';
    } else if (*compare) {
      std::vector<ExperimentReport> gaze, nogaze;
      for (const auto& p : gaze_runs) gaze.push_back(load_report(p));
      for (const auto& p : nogaze_runs) nogaze.push_back(load_report(p));
      const auto table = build_comparison(gaze, nogaze);
      const auto text = render_table(table);
      write_text(out, text);
      auto json_path = std::filesystem::path(out);
      json_path.replace_extension(".json");
      if (json_path == std::filesystem::path(out)) json_path += ".table.json";
      write_text(json_path, to_json(table).dump(2) + "\n");
      std::cout << text;
    } else if (*selftest) {
      return run_selftest(std::cout) ? 0 : 1;
    }
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
