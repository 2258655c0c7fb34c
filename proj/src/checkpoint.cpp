#include <fstream>

#include "gazeaeg/error.hpp"
#include "gazeaeg/model.hpp"

namespace gazeaeg {

namespace {
constexpr std::string_view kFormat = "gazeaeg-checkpoint";
constexpr int kVersion = 1;
}  // namespace

nlohmann::json checkpoint_to_json(const ModelParams& params) {
  auto tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < params.store.size(); ++i) {
    const auto& t = params.store.value(i);
    tensors.push_back({{"name", params.store.name(i)},
                       {"shape", t.shape()},
                       {"data", std::vector<double>(t.values().begin(), t.values().end())}});
  }
  return {{"format", kFormat}, {"version", kVersion}, {"config", to_json(params.config)}, {"tensors", tensors}};
}

ModelParams checkpoint_from_json(const nlohmann::json& doc) {
  ModelParams p;
  try {
    if (doc.at("format").get<std::string>() != kFormat) throw FormatError("not a gazeaeg checkpoint");
    const auto version = doc.at("version").get<int>();
    if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    p.config = model_config_from_json(doc.at("config"));
    for (const auto& t : doc.at("tensors")) {
      p.store.add(t.at("name").get<std::string>(),
                  num::Tensor(t.at("shape").get<num::Shape>(), t.at("data").get<std::vector<double>>()));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed checkpoint: ") + ex.what());
  }
  p.index = resolve_params(p.store);
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(params).dump() << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(path.string() + ": " + ex.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace gazeaeg
