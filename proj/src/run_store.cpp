#include "gazeaeg/run_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "gazeaeg/error.hpp"

namespace gazeaeg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t to_size(const std::string& v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
  return out;
}

std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Key {
  std::string name;
  Setter set;
  Getter get;
};

std::vector<Key> keys() {
  std::vector<Key> k;
  const auto size_key = [&](std::string name, auto member) {
    k.push_back({std::move(name), [member](ExperimentConfig& c, const std::string& v) { member(c) = to_size(v); },
                 [member](const ExperimentConfig& c) { return std::to_string(member(c)); }});
  };
  const auto real_key = [&](std::string name, auto member) {
    k.push_back({std::move(name), [member](ExperimentConfig& c, const std::string& v) { member(c) = to_double(v); },
                 [member](const ExperimentConfig& c) { return num(member(c)); }});
  };
  size_key("batch_size", [](auto& c) -> auto& { return c.train.batch_size; });
  size_key("epochs", [](auto& c) -> auto& { return c.train.epochs; });
  real_key("lr", [](auto& c) -> auto& { return c.train.optimizer.lr; });
  real_key("rho", [](auto& c) -> auto& { return c.train.optimizer.rho; });
  real_key("momentum", [](auto& c) -> auto& { return c.train.optimizer.momentum; });
  real_key("epsilon", [](auto& c) -> auto& { return c.train.optimizer.epsilon; });
  real_key("grad_clip", [](auto& c) -> auto& { return c.train.grad_clip; });
  real_key("lr_decay", [](auto& c) -> auto& { return c.train.lr_decay; });
  size_key("grad_shards", [](auto& c) -> auto& { return c.train.grad_shards; });
  size_key("threads", [](auto& c) -> auto& { return c.train.threads; });
  size_key("embed_dim", [](auto& c) -> auto& { return c.train.model.embed_dim; });
  size_key("cnn_kernel", [](auto& c) -> auto& { return c.train.model.cnn_kernel; });
  size_key("cnn_filters", [](auto& c) -> auto& { return c.train.model.cnn_filters; });
  size_key("lstm_hidden", [](auto& c) -> auto& { return c.train.model.lstm_hidden; });
  size_key("attention_dim", [](auto& c) -> auto& { return c.train.model.attention_dim; });
  real_key("dropout_rate", [](auto& c) -> auto& { return c.train.model.dropout_rate; });
  k.push_back({"word_pooling",
               [](ExperimentConfig& c, const std::string& v) {
                 try {
                   c.train.model.word_pooling = parse_word_pooling(v);
                 } catch (const Error& ex) {
                   throw ConfigError(ex.what());
                 }
               },
               [](const ExperimentConfig& c) { return std::string(to_string(c.train.model.word_pooling)); }});
  for (auto a : kGazeAttributes) {
    k.push_back({"gaze_weight_" + std::string(to_string(a)),
                 [a](ExperimentConfig& c, const std::string& v) { c.train.model.gaze_loss_weights[a] = to_double(v); },
                 [a](const ExperimentConfig& c) { return num(c.train.model.gaze_loss_weights.at(a)); }});
  }
  size_key("max_sentences", [](auto& c) -> auto& { return c.limits.max_sentences; });
  size_key("max_tokens", [](auto& c) -> auto& { return c.limits.max_tokens; });
  size_key("min_count", [](auto& c) -> auto& { return c.min_count; });
  size_key("gaze_bins", [](auto& c) -> auto& { return c.gaze_bins; });
  k.push_back({"embeddings",
               [](ExperimentConfig& c, const std::string& v) {
                 if (v.empty()) {
                   c.embeddings.reset();
                 } else {
                   c.embeddings = v;
                 }
               },
               [](const ExperimentConfig& c) { return c.embeddings ? c.embeddings->string() : std::string(); }});
  k.push_back({"fold_scheme", [](ExperimentConfig& c, const std::string& v) { c.scheme = parse_fold_scheme(v); },
               [](const ExperimentConfig& c) { return std::string(to_string(c.scheme)); }});
  return k;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(path.string() + ": " + ex.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::filesystem::path fold_dir(const std::filesystem::path& run, std::size_t fold) {
  return run / ("fold_" + std::to_string(fold));
}

}  // namespace

ExperimentConfig parse_config(std::istream& in, ExperimentConfig base) {
  const auto table = keys();
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(no) + ": expected key = value");
    const auto key = trim(std::string_view(text).substr(0, eq));
    const auto value = trim(std::string_view(text).substr(eq + 1));
    const auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return k.name == key; });
    if (it == table.end()) throw ConfigError("config line " + std::to_string(no) + ": unknown key '" + key + "'");
    try {
      it->set(base, value);
    } catch (const Error& ex) {
      throw ConfigError("config line " + std::to_string(no) + " (" + key + "): " + ex.what());
    }
  }
  return base;
}

ExperimentConfig read_config_file(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in, std::move(base));
}

std::string config_to_text(const ExperimentConfig& config) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

ExperimentReport train_run(const RunRequest& req, const std::filesystem::path& out_dir, std::ostream* log) {
  const auto corpus = read_corpus_json(req.corpus);
  std::optional<GazeLabelMap> labels;
  if (req.gaze) labels = bin_and_scale(read_gaze_tsv(*req.gaze), req.config.gaze_bins);
  if (req.mode == RunMode::Gaze && !labels) throw ConfigError("the gaze configuration needs --gaze");

  std::filesystem::create_directories(out_dir);
  const auto plan = make_zero_shot_splits(corpus, req.target_prompt, req.seed, req.config.scheme);
  nlohmann::json run = {{"corpus", std::filesystem::absolute(req.corpus).string()},
                        {"gaze", req.gaze ? std::filesystem::absolute(*req.gaze).string() : std::string()},
                        {"target_prompt", req.target_prompt},
                        {"config", std::string(to_string(req.mode))},
                        {"seed", req.seed},
                        {"settings", describe(req.config, req.mode)},
                        {"split_plan", to_json(plan)}};
  write_json(out_dir / "run.json", run);
  {
    std::ofstream cfg(out_dir / "config.txt");
    if (!cfg) throw IoError("cannot write " + (out_dir / "config.txt").string());
    cfg << config_to_text(req.config);
  }

  std::ofstream train_log(out_dir / "train_log.jsonl");
  if (!train_log) throw IoError("cannot write " + (out_dir / "train_log.jsonl").string());
  RunHooks hooks;
  hooks.on_epoch = [&](std::size_t fold, const EpochRecord& rec) {
    auto j = to_json(rec, true);
    j["fold"] = fold;
    train_log << j.dump() << '\n' << std::flush;
    if (log) {
      *log << "fold " << fold << " epoch " << rec.epoch << " loss " << rec.train_loss << " dev_qwk " << rec.dev_qwk
           << '\n';
    }
  };
  hooks.on_fold = [&](std::size_t fold, const Vocabulary& vocab, const FoldTraining& trained, const FoldReport& rep) {
    const auto dir = fold_dir(out_dir, fold);
    std::filesystem::create_directories(dir);
    write_json(dir / "vocab.json", vocab.to_json());
    save_checkpoint(dir / "params.json", trained.best_params);
    auto history = nlohmann::json::array();
    for (const auto& h : trained.history) history.push_back(to_json(h, false));
    write_json(dir / "history.json",
               {{"best_epoch", trained.best_epoch}, {"best_dev_qwk", trained.best_dev_qwk}, {"history", history}});
    if (log) *log << "fold " << fold << " best_epoch " << rep.best_epoch << " test_qwk " << rep.test_qwk << '\n';
  };
  auto report = run_experiment(corpus, labels ? &*labels : nullptr, req.target_prompt, req.mode, req.config, req.seed,
                               PromptTable::asap(), hooks);
  write_report(out_dir / "report.json", report);
  return report;
}

ExperimentReport evaluate_run(const std::filesystem::path& run_dir) {
  const auto run = read_json(run_dir / "run.json");
  ExperimentReport report;
  std::vector<Essay> corpus;
  SplitPlan plan;
  try {
    report.target_prompt = run.at("target_prompt").get<int>();
    report.mode = parse_run_mode(run.at("config").get<std::string>());
    report.seed = run.at("seed").get<std::uint64_t>();
    report.settings = run.at("settings");
    corpus = read_corpus_json(run.at("corpus").get<std::string>());
    plan = split_plan_from_json(run.at("split_plan"));
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError((run_dir / "run.json").string() + ": " + ex.what());
  }
  const auto config = read_config_file(run_dir / "config.txt");
  const auto& specs = PromptTable::asap();
  if (count_zero_shot_violations(plan, corpus) != 0) {
    throw ContractError("stored split plan does not match the corpus at " + run.at("corpus").get<std::string>());
  }
  std::vector<Essay> test;
  for (const auto& e : corpus) {
    if (e.prompt_id == report.target_prompt) test.push_back(e);
  }
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto dir = fold_dir(run_dir, f);
    const auto vocab = Vocabulary::from_json(read_json(dir / "vocab.json"));
    const auto params = load_checkpoint(dir / "params.json");
    auto fold = evaluate_fold(params, vocab, test, specs.at(report.target_prompt), config.limits, specs);
    const auto history = read_json(dir / "history.json");
    fold.fold = f;
    fold.best_epoch = history.at("best_epoch").get<std::size_t>();
    fold.dev_qwk = history.at("best_dev_qwk").get<double>();
    for (const auto& h : history.at("history")) fold.history.push_back(epoch_record_from_json(h));
    report.folds.push_back(std::move(fold));
  }
  report.mean_test_qwk = mean_test_qwk(report.folds);
  return report;
}

void write_report(const std::filesystem::path& path, const ExperimentReport& report) {
  write_json(path, to_json(report));
}

ExperimentReport read_report(const std::filesystem::path& path) { return experiment_report_from_json(read_json(path)); }

ExperimentReport load_report(const std::filesystem::path& run_or_report) {
  if (std::filesystem::is_directory(run_or_report)) return read_report(run_or_report / "report.json");
  return read_report(run_or_report);
}

}  // namespace gazeaeg
