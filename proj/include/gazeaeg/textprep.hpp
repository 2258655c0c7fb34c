#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gazeaeg/dataset.hpp"
#include "gazeaeg/tensor.hpp"

namespace gazeaeg {

// Splits on runs of '.', '!' or '?' that are followed by whitespace or the
// end of the text. Sentences are trimmed; empty ones are dropped.
std::vector<std::string> split_sentences(std::string_view text);

// Lowercases, splits on whitespace and peels every leading/trailing
// punctuation character into its own token. ASAP anonymisation tokens
// such as "@CAPS1" are kept verbatim.
std::vector<std::string> tokenize(std::string_view sentence);

// Sentence-split then tokenized text.
std::vector<std::vector<std::string>> tokenize_essay(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnknown = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnknownToken = "<unk>";

  Vocabulary();

  // Appends a token if it is not present and returns its index.
  std::int32_t add(std::string_view token);

  std::int32_t index_of(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token_at(std::int32_t index) const;
  std::size_t size() const { return tokens_.size(); }
  std::span<const std::string> tokens() const { return tokens_; }

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& doc);

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// Tokens with frequency >= min_count, ordered by descending frequency then
// lexicographically, after the padding and unknown entries. The corpus
// must only contain training essays.
Vocabulary build_vocab(std::span<const Essay> corpus, std::size_t min_count);

// V x dim matrix. Row 0 is zero; rows for words missing from the file are
// uniform in [-0.05, 0.05].
using EmbeddingMatrix = num::Tensor;

EmbeddingMatrix random_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed);

// Reads a plain-text word-vector file ("token v1 ... v_dim" per line).
EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t dim,
                                std::uint64_t seed);

struct EncodingLimits {
  std::size_t max_sentences = 40;
  std::size_t max_tokens = 50;
};

// Per-token gaze targets laid out on the sentence x token grid. values is
// attribute-major: values[a * S * T + s * T + t].
struct GazeGrid {
  std::vector<double> values;
  std::vector<std::uint8_t> mask;  // S * T
};

struct EncodedEssay {
  std::int64_t essay_id = 0;
  int prompt_id = 0;
  int gold_score = 0;
  std::size_t sentences = 0;  // S (grid rows, including padding)
  std::size_t tokens = 0;     // T (grid columns, including padding)
  std::vector<std::int32_t> indices;
  std::vector<std::uint8_t> sentence_mask;
  std::vector<std::uint8_t> token_mask;
  double target = 0.0;
  // Grid cell (s * T + t) of every token of the untruncated essay, in
  // textprep order; -1 where truncation dropped the token.
  std::vector<std::int64_t> flat_to_cell;
  std::optional<GazeGrid> gaze;

  std::size_t cell(std::size_t s, std::size_t t) const { return s * tokens + t; }
  std::size_t sentence_length(std::size_t s) const;
  std::size_t active_sentences() const;
  std::size_t active_tokens() const;
};

EncodedEssay encode_essay(const Essay& essay, const Vocabulary& vocab, const PromptTable& specs,
                          const EncodingLimits& limits = {});

}  // namespace gazeaeg
