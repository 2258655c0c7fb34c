#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gazeaeg {

enum class EssayType { Persuasive, SourceDependent, Narrative };

std::string_view to_string(EssayType type);

struct PromptSpec {
  int prompt_id = 0;
  int min_score = 0;
  int max_score = 0;
  EssayType essay_type = EssayType::Persuasive;
  // Number of graded essays for the prompt in the official training file.
  std::size_t expected_count = 0;
  int mean_word_count = 0;

  int range() const { return max_score - min_score; }
  bool contains(int score) const { return score >= min_score && score <= max_score; }
};

// The eight ASAP prompts.
class PromptTable {
 public:
  explicit PromptTable(std::vector<PromptSpec> specs);

  static const PromptTable& asap();

  bool contains(int prompt_id) const;
  const PromptSpec& at(int prompt_id) const;
  std::span<const PromptSpec> all() const { return specs_; }

 private:
  std::vector<PromptSpec> specs_;
};

struct Essay {
  std::int64_t essay_id = 0;
  int prompt_id = 0;
  std::string text;
  int gold_score = 0;

  bool operator==(const Essay&) const = default;
};

// Reads the Kaggle ASAP training TSV. Requires a header row with columns
// essay_id, essay_set, essay and domain1_score (any order, extra columns
// ignored). Invalid UTF-8 is replaced by U+FFFD rather than rejected.
std::vector<Essay> parse_asap_tsv(std::istream& in, const PromptTable& specs = PromptTable::asap());
std::vector<Essay> load_asap_tsv(const std::filesystem::path& path,
                                 const PromptTable& specs = PromptTable::asap());

// Maps a raw score onto [0, 1] with the prompt's min-max range.
double normalize_score(int raw, const PromptSpec& spec);

// Inverse of normalize_score for model outputs: rounds half away from zero
// and clamps into the prompt's range.
int denormalize_score(double unit, const PromptSpec& spec);

std::map<int, std::size_t> count_by_prompt(std::span<const Essay> essays);

// Replaces invalid UTF-8 sequences by U+FFFD.
std::string sanitize_utf8(std::string_view bytes);

nlohmann::json corpus_to_json(std::span<const Essay> essays);
std::vector<Essay> corpus_from_json(const nlohmann::json& doc,
                                    const PromptTable& specs = PromptTable::asap());
void write_corpus_json(const std::filesystem::path& path, std::span<const Essay> essays);
std::vector<Essay> read_corpus_json(const std::filesystem::path& path,
                                    const PromptTable& specs = PromptTable::asap());

}  // namespace gazeaeg
