#include "gazeaeg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "gazeaeg/error.hpp"

namespace gazeaeg {

std::string_view to_string(EssayType type) {
  switch (type) {
    case EssayType::Persuasive:
      return "Persuasive";
    case EssayType::SourceDependent:
      return "Source-Dependent";
    case EssayType::Narrative:
      return "Narrative";
  }
  return "?";
}

PromptTable::PromptTable(std::vector<PromptSpec> specs) : specs_(std::move(specs)) {
  std::sort(specs_.begin(), specs_.end(),
            [](const PromptSpec& a, const PromptSpec& b) { return a.prompt_id < b.prompt_id; });
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const auto& s = specs_[i];
    if (s.min_score >= s.max_score) {
      throw ConfigError("prompt " + std::to_string(s.prompt_id) + ": min_score must be below max_score");
    }
    if (i > 0 && specs_[i - 1].prompt_id == s.prompt_id) {
      throw ConfigError("duplicate prompt id " + std::to_string(s.prompt_id));
    }
  }
}

const PromptTable& PromptTable::asap() {
  static const PromptTable table({
      {1, 2, 12, EssayType::Persuasive, 1783, 350},
      {2, 1, 6, EssayType::Persuasive, 1800, 350},
      {3, 0, 3, EssayType::SourceDependent, 1726, 150},
      {4, 0, 3, EssayType::SourceDependent, 1770, 150},
      {5, 0, 4, EssayType::SourceDependent, 1805, 150},
      {6, 0, 4, EssayType::SourceDependent, 1800, 150},
      {7, 0, 30, EssayType::Narrative, 1569, 250},
      {8, 0, 60, EssayType::Narrative, 723, 650},
  });
  return table;
}

bool PromptTable::contains(int prompt_id) const {
  return std::any_of(specs_.begin(), specs_.end(),
                     [&](const PromptSpec& s) { return s.prompt_id == prompt_id; });
}

const PromptSpec& PromptTable::at(int prompt_id) const {
  for (const auto& s : specs_) {
    if (s.prompt_id == prompt_id) return s;
  }
  throw ValidationError("unknown prompt id " + std::to_string(prompt_id));
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
  text = trim(text);
  if (text.empty()) return false;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last;
}

std::size_t column_index(const std::vector<std::string_view>& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == name) return i;
  }
  throw FormatError("missing column '" + std::string(name) + "' in essay TSV header");
}

void validate_essay(const Essay& e, const PromptTable& specs) {
  if (e.essay_id <= 0) {
    throw ValidationError("essay id must be positive, got " + std::to_string(e.essay_id));
  }
  if (!specs.contains(e.prompt_id)) {
    throw ValidationError("essay " + std::to_string(e.essay_id) + ": prompt id " +
                          std::to_string(e.prompt_id) + " is not a known prompt");
  }
  const auto& spec = specs.at(e.prompt_id);
  if (!spec.contains(e.gold_score)) {
    throw ValidationError("essay " + std::to_string(e.essay_id) + ": score " +
                          std::to_string(e.gold_score) + " outside prompt " +
                          std::to_string(e.prompt_id) + " range " + std::to_string(spec.min_score) +
                          "-" + std::to_string(spec.max_score));
  }
  if (e.text.empty()) {
    throw ValidationError("essay " + std::to_string(e.essay_id) + ": empty text");
  }
}

}  // namespace

std::string sanitize_utf8(std::string_view bytes) {
  static constexpr std::string_view kReplacement = "\xEF\xBF\xBD";
  std::string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  const std::size_t n = bytes.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(bytes[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    }
    bool ok = len != 0 && i + len <= n;
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto cc = static_cast<unsigned char>(bytes[i + k]);
      if ((cc & 0xC0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (cc & 0x3F);
      }
    }
    if (ok) {
      // Reject overlong forms, surrogates and out-of-range code points.
      const bool overlong = (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000);
      ok = !overlong && cp <= 0x10FFFF && !(cp >= 0xD800 && cp <= 0xDFFF);
    }
    if (ok) {
      out.append(bytes.substr(i, len));
      i += len;
    } else {
      out.append(kReplacement);
      ++i;
    }
  }
  return out;
}

std::vector<Essay> parse_asap_tsv(std::istream& in, const PromptTable& specs) {
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("essay TSV is empty; a header row is required");
  }
  if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
  const std::string header_line = sanitize_utf8(line);
  const auto header = split_tabs(header_line);
  const auto id_col = column_index(header, "essay_id");
  const auto set_col = column_index(header, "essay_set");
  const auto text_col = column_index(header, "essay");
  const auto score_col = column_index(header, "domain1_score");
  const auto needed = std::max({id_col, set_col, text_col, score_col}) + 1;

  std::vector<Essay> essays;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::string clean = sanitize_utf8(line);
    const auto fields = split_tabs(clean);
    if (fields.size() < needed) {
      throw FormatError("line " + std::to_string(line_no) + ": expected at least " + std::to_string(needed) +
                        " fields, found " + std::to_string(fields.size()));
    }
    Essay e;
    if (!parse_int(fields[id_col], e.essay_id)) {
      throw ParseError("line " + std::to_string(line_no) + ": essay_id '" + std::string(fields[id_col]) +
                       "' is not an integer");
    }
    if (!parse_int(fields[set_col], e.prompt_id)) {
      throw ParseError("essay " + std::to_string(e.essay_id) + ": essay_set '" + std::string(fields[set_col]) +
                       "' is not an integer");
    }
    if (!parse_int(fields[score_col], e.gold_score)) {
      throw ParseError("essay " + std::to_string(e.essay_id) + ": domain1_score '" +
                       std::string(fields[score_col]) + "' is not an integer");
    }
    e.text = std::string(trim(fields[text_col]));
    // The official file wraps some essays in double quotes.
    if (e.text.size() >= 2 && e.text.front() == '"' && e.text.back() == '"') {
      e.text = std::string(trim(std::string_view(e.text).substr(1, e.text.size() - 2)));
    }
    validate_essay(e, specs);
    essays.push_back(std::move(e));
  }
  return essays;
}

std::vector<Essay> load_asap_tsv(const std::filesystem::path& path, const PromptTable& specs) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open essay file " + path.string());
  return parse_asap_tsv(in, specs);
}

double normalize_score(int raw, const PromptSpec& spec) {
  if (!spec.contains(raw)) {
    throw DomainError("score " + std::to_string(raw) + " outside prompt " + std::to_string(spec.prompt_id) +
                      " range " + std::to_string(spec.min_score) + "-" + std::to_string(spec.max_score));
  }
  return static_cast<double>(raw - spec.min_score) / static_cast<double>(spec.range());
}

int denormalize_score(double unit, const PromptSpec& spec) {
  if (!std::isfinite(unit)) {
    throw NumericError("cannot rescale non-finite prediction for prompt " + std::to_string(spec.prompt_id));
  }
  const double raw = std::round(spec.min_score + unit * spec.range());
  return static_cast<int>(std::clamp(raw, static_cast<double>(spec.min_score), static_cast<double>(spec.max_score)));
}

std::map<int, std::size_t> count_by_prompt(std::span<const Essay> essays) {
  std::map<int, std::size_t> counts;
  for (const auto& e : essays) ++counts[e.prompt_id];
  return counts;
}

nlohmann::json corpus_to_json(std::span<const Essay> essays) {
  auto doc = nlohmann::json::array();
  for (const auto& e : essays) {
    doc.push_back({{"essay_id", e.essay_id}, {"prompt_id", e.prompt_id}, {"score", e.gold_score}, {"text", e.text}});
  }
  return doc;
}

std::vector<Essay> corpus_from_json(const nlohmann::json& doc, const PromptTable& specs) {
  if (!doc.is_array()) throw FormatError("corpus JSON must be an array of essays");
  std::vector<Essay> essays;
  essays.reserve(doc.size());
  for (const auto& item : doc) {
    Essay e;
    try {
      e.essay_id = item.at("essay_id").get<std::int64_t>();
      e.prompt_id = item.at("prompt_id").get<int>();
      e.gold_score = item.at("score").get<int>();
      e.text = item.at("text").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(std::string("malformed corpus entry: ") + ex.what());
    }
    validate_essay(e, specs);
    essays.push_back(std::move(e));
  }
  return essays;
}

void write_corpus_json(const std::filesystem::path& path, std::span<const Essay> essays) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << corpus_to_json(essays).dump() << '\n';
}

std::vector<Essay> read_corpus_json(const std::filesystem::path& path, const PromptTable& specs) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(path.string() + ": " + ex.what());
  }
  return corpus_from_json(doc, specs);
}

}  // namespace gazeaeg
