#include "gazeaeg/textprep.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "gazeaeg/error.hpp"
#include "gazeaeg/random.hpp"

namespace gazeaeg {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// "@CAPS1", "@LOCATION2": '@' followed by letters/digits.
bool is_anonymization(std::string_view s) {
  return s.size() > 1 && s.front() == '@' && std::all_of(s.begin() + 1, s.end(), is_alnum);
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto emit = [&](std::size_t end) {
    const auto piece = trim(text.substr(start, end - start));
    if (!piece.empty()) out.emplace_back(piece);
    start = end;
  };
  while (i < n) {
    if (is_terminal(text[i])) {
      std::size_t j = i;
      while (j < n && is_terminal(text[j])) ++j;
      if (j == n || is_space(text[j])) {
        emit(j);
      }
      i = j;
    } else {
      ++i;
    }
  }
  emit(n);
  return out;
}

std::vector<std::string> tokenize(std::string_view sentence) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = sentence.size();
  while (i < n) {
    while (i < n && is_space(sentence[i])) ++i;
    std::size_t j = i;
    while (j < n && !is_space(sentence[j])) ++j;
    std::string_view chunk = sentence.substr(i, j - i);
    i = j;
    if (chunk.empty()) continue;

    std::size_t b = 0;
    std::size_t e = chunk.size();
    std::vector<std::string> tail;
    while (b < e && is_punct(chunk[b])) {
      if (chunk[b] == '@' && b + 1 < e && is_alnum(chunk[b + 1])) break;
      out.emplace_back(1, chunk[b]);
      ++b;
    }
    while (e > b && is_punct(chunk[e - 1])) {
      tail.emplace_back(1, chunk[e - 1]);
      --e;
    }
    if (e > b) {
      const auto core = chunk.substr(b, e - b);
      out.push_back(is_anonymization(core) ? std::string(core) : lower(core));
    }
    out.insert(out.end(), tail.rbegin(), tail.rend());
  }
  return out;
}

std::vector<std::vector<std::string>> tokenize_essay(std::string_view text) {
  std::vector<std::vector<std::string>> out;
  for (const auto& sentence : split_sentences(text)) {
    auto tokens = tokenize(sentence);
    if (!tokens.empty()) out.push_back(std::move(tokens));
  }
  return out;
}

Vocabulary::Vocabulary() {
  add(kPadToken);
  add(kUnknownToken);
}

std::int32_t Vocabulary::add(std::string_view token) {
  const std::string key(token);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const auto idx = static_cast<std::int32_t>(tokens_.size());
  tokens_.push_back(key);
  index_.emplace(key, idx);
  return idx;
}

std::int32_t Vocabulary::index_of(std::string_view token) const {
  if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
  return kUnknown;
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

const std::string& Vocabulary::token_at(std::int32_t index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= tokens_.size()) {
    throw DomainError("vocabulary index " + std::to_string(index) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(index)];
}

nlohmann::json Vocabulary::to_json() const { return nlohmann::json(tokens_); }

Vocabulary Vocabulary::from_json(const nlohmann::json& doc) {
  if (!doc.is_array() || doc.size() < 2 || doc[0] != kPadToken || doc[1] != kUnknownToken) {
    throw FormatError("vocabulary JSON must be an array starting with <pad>, <unk>");
  }
  Vocabulary v;
  for (std::size_t i = 2; i < doc.size(); ++i) {
    const auto token = doc[i].get<std::string>();
    if (v.contains(token)) throw FormatError("duplicate vocabulary token '" + token + "'");
    v.add(token);
  }
  return v;
}

Vocabulary build_vocab(std::span<const Essay> corpus, std::size_t min_count) {
  if (corpus.empty()) throw DomainError("cannot build a vocabulary from an empty corpus");
  if (min_count == 0) throw ParameterError("min_count must be positive");
  std::map<std::string, std::size_t> counts;
  for (const auto& essay : corpus) {
    for (const auto& sentence : tokenize_essay(essay.text)) {
      for (const auto& token : sentence) ++counts[token];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, count] : counts) {
    if (count >= min_count && token != Vocabulary::kPadToken && token != Vocabulary::kUnknownToken) {
      kept.emplace_back(token, count);
    }
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  for (const auto& entry : kept) vocab.add(entry.first);
  return vocab;
}

EmbeddingMatrix random_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ParameterError("embedding dimension must be positive");
  num::Tensor m({vocab.size(), dim});
  Rng rng(derive_seed(seed, 0xE3BEDULL));
  for (std::size_t r = 1; r < vocab.size(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) m.at(r, c) = rng.uniform(-0.05, 0.05);
  }
  return m;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t dim,
                                std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file " + path.string());
  auto m = random_embeddings(vocab, dim, seed);
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> row(dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::size_t count = 0;
    std::string value;
    while (fields >> value) {
      if (count < dim) {
        const auto* first = value.data();
        const auto* last = value.data() + value.size();
        auto [ptr, ec] = std::from_chars(first, last, row[count]);
        if (ec != std::errc{} || ptr != last || !std::isfinite(row[count])) {
          throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + value + "'");
        }
      }
      ++count;
    }
    if (count != dim) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                        " values, found " + std::to_string(count));
    }
    const auto idx = vocab.contains(token) ? vocab.index_of(token) : Vocabulary::kUnknown;
    if (idx == Vocabulary::kPad || idx == Vocabulary::kUnknown) continue;
    for (std::size_t c = 0; c < dim; ++c) m.at(static_cast<std::size_t>(idx), c) = row[c];
  }
  return m;
}

std::size_t EncodedEssay::sentence_length(std::size_t s) const {
  std::size_t n = 0;
  while (n < tokens && token_mask[cell(s, n)]) ++n;
  return n;
}

std::size_t EncodedEssay::active_sentences() const {
  return static_cast<std::size_t>(std::count(sentence_mask.begin(), sentence_mask.end(), std::uint8_t{1}));
}

std::size_t EncodedEssay::active_tokens() const {
  return static_cast<std::size_t>(std::count(token_mask.begin(), token_mask.end(), std::uint8_t{1}));
}

EncodedEssay encode_essay(const Essay& essay, const Vocabulary& vocab, const PromptTable& specs,
                          const EncodingLimits& limits) {
  if (limits.max_sentences == 0 || limits.max_tokens == 0) {
    throw ParameterError("encoding limits must be positive");
  }
  const auto sentences = tokenize_essay(essay.text);
  if (sentences.empty()) {
    throw EncodingError("essay " + std::to_string(essay.essay_id) + " has no tokens");
  }
  EncodedEssay enc;
  enc.essay_id = essay.essay_id;
  enc.prompt_id = essay.prompt_id;
  enc.gold_score = essay.gold_score;
  enc.sentences = limits.max_sentences;
  enc.tokens = limits.max_tokens;
  enc.indices.assign(enc.sentences * enc.tokens, Vocabulary::kPad);
  enc.token_mask.assign(enc.sentences * enc.tokens, 0);
  enc.sentence_mask.assign(enc.sentences, 0);
  enc.target = normalize_score(essay.gold_score, specs.at(essay.prompt_id));

  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto& tokens = sentences[s];
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      if (s < enc.sentences && t < enc.tokens) {
        const auto c = enc.cell(s, t);
        enc.indices[c] = vocab.index_of(tokens[t]);
        enc.token_mask[c] = 1;
        enc.sentence_mask[s] = 1;
        enc.flat_to_cell.push_back(static_cast<std::int64_t>(c));
      } else {
        enc.flat_to_cell.push_back(-1);
      }
    }
  }
  return enc;
}

}  // namespace gazeaeg
