#include "gazeaeg/synthetic.hpp"

#include <algorithm>
#include <array>
#include <string>
#include <string_view>

#include "gazeaeg/error.hpp"
#include "gazeaeg/random.hpp"

namespace gazeaeg {

namespace {

constexpr std::array<std::string_view, 28> kStrongWords{
    "consequently", "furthermore",   "substantial",  "perspective", "nevertheless", "significant",
    "demonstrates", "compelling",    "comprehensive", "fundamental", "articulate",   "elaborate",
    "illustrates",  "particularly",  "considerable", "contributes", "meaningful",   "thoughtful",
    "perseverance", "understanding", "development",  "relationship", "circumstances", "evidence",
    "analysis",     "significantly", "moreover",     "therefore"};

constexpr std::array<std::string_view, 16> kWeakWords{"stuff", "thing", "good", "bad",  "like", "lot",
                                                      "really", "very", "kinda", "cool", "nice", "ok",
                                                      "dunno", "gonna", "whatever", "yeah"};

constexpr std::array<std::string_view, 24> kFunctionWords{
    "the", "a",    "and",  "to",   "of",   "is",  "it",     "that", "in",   "we",   "people", "they",
    "this", "be", "can",  "have", "with", "for", "are",    "not",  "i",    "think", "because", "when"};

constexpr std::array<std::array<std::string_view, 8>, 8> kTopicWords{{
    {"computers", "internet", "online", "typing", "screen", "websites", "games", "email"},
    {"library", "books", "censorship", "shelves", "offensive", "magazines", "movies", "readers"},
    {"cyclist", "road", "desert", "water", "heat", "hills", "bicycle", "thirst"},
    {"hibiscus", "garden", "winter", "geese", "test", "spring", "flower", "snow"},
    {"memoir", "cuban", "kitchen", "parents", "music", "home", "family", "cooking"},
    {"dirigibles", "mast", "building", "mooring", "airship", "helium", "wind", "builders"},
    {"patience", "waited", "line", "calm", "doctor", "slowly", "quiet", "turn"},
    {"laughter", "friends", "joke", "smile", "funny", "laughing", "story", "party"},
}};

std::string make_essay(Rng& rng, int prompt_id, double quality) {
  const auto& topic = kTopicWords[static_cast<std::size_t>(prompt_id - 1) % kTopicWords.size()];
  const double p_strong = 0.04 + 0.36 * quality;
  const double p_weak = 0.04 + 0.36 * (1.0 - quality);
  const double p_topic = 0.2;
  const auto sentences = 3 + static_cast<int>(rng.below(3)) + static_cast<int>(2.0 * quality + 0.5);

  std::string text;
  for (int s = 0; s < sentences; ++s) {
    const auto tokens = 6 + static_cast<int>(rng.below(6));
    for (int t = 0; t < tokens; ++t) {
      std::string_view word;
      const double u = rng.uniform();
      if (u < p_strong) {
        word = kStrongWords[rng.below(kStrongWords.size())];
      } else if (u < p_strong + p_weak) {
        word = kWeakWords[rng.below(kWeakWords.size())];
      } else if (u < p_strong + p_weak + p_topic) {
        word = topic[rng.below(topic.size())];
      } else {
        word = kFunctionWords[rng.below(kFunctionWords.size())];
      }
      std::string w(word);
      if (t == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
      if (!text.empty()) text.push_back(' ');
      text += w;
      if (t + 1 < tokens && rng.bernoulli(0.06)) text.push_back(',');
    }
    text.push_back(rng.bernoulli(0.85) ? '.' : '!');
  }
  return text;
}

}  // namespace

std::vector<Essay> make_synthetic_corpus(const SyntheticCorpusOptions& options, const PromptTable& specs) {
  if (options.prompts.empty()) throw ConfigError("synthetic corpus needs at least one prompt");
  std::vector<Essay> essays;
  essays.reserve(options.prompts.size() * options.essays_per_prompt);
  auto next_id = options.first_essay_id;
  for (const int prompt : options.prompts) {
    const auto& spec = specs.at(prompt);
    Rng rng(derive_seed(options.seed, prompt));
    for (std::size_t i = 0; i < options.essays_per_prompt; ++i) {
      const double quality = rng.uniform();
      const double noisy = std::clamp(quality + options.score_noise * rng.normal(), 0.0, 1.0);
      Essay e;
      e.essay_id = next_id++;
      e.prompt_id = prompt;
      e.gold_score = denormalize_score(noisy, spec);
      e.text = make_essay(rng, prompt, quality);
      essays.push_back(std::move(e));
    }
  }
  return essays;
}

}  // namespace gazeaeg
