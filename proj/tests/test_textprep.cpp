#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "gazeaeg/error.hpp"
#include "gazeaeg/synthetic.hpp"
#include "gazeaeg/textprep.hpp"

using namespace gazeaeg;

using Strings = std::vector<std::string>;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path;
}

std::string join(const Strings& tokens) {
  std::string out;
  for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
  return out;
}

}  // namespace

TEST_CASE("split_sentences") {
  CHECK(split_sentences("I agree. Computers help!") == Strings{"I agree.", "Computers help!"});
  CHECK(split_sentences("no punctuation") == Strings{"no punctuation"});
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("   ").empty());
  CHECK(split_sentences("Wait... what?! Yes") == Strings{"Wait...", "what?!", "Yes"});
  // A period inside a token does not end the sentence.
  CHECK(split_sentences("It cost 3.50 dollars. Fine.") == Strings{"It cost 3.50 dollars.", "Fine."});
}

TEST_CASE("tokenize") {
  CHECK(tokenize("Dear newspaper,") == Strings{"dear", "newspaper", ","});
  CHECK(tokenize("@CAPS1 said so.") == Strings{"@CAPS1", "said", "so", "."});
  CHECK(tokenize("don't stop") == Strings{"don't", "stop"});
  CHECK(tokenize("(Really?!)") == Strings{"(", "really", "?", "!", ")"});
  CHECK(tokenize("").empty());
}

TEST_CASE("tokenize is idempotent on its joined output") {
  SyntheticCorpusOptions o;
  o.essays_per_prompt = 10;
  auto corpus = make_synthetic_corpus(o);
  corpus.push_back({999, 1, "Hello, @CAPS1! \"Quotes\" (and) don't... @LOCATION2's end?!", 5});
  for (const auto& e : corpus) {
    for (const auto& sentence : split_sentences(e.text)) {
      const auto once = tokenize(sentence);
      CHECK(tokenize(join(once)) == once);
    }
  }
}

TEST_CASE("build_vocab") {
  const std::vector<Essay> a{{1, 1, "a a b", 5}};
  const auto v = build_vocab(a, 2);
  CHECK(v.size() == 3);
  CHECK(v.token_at(0) == "<pad>");
  CHECK(v.token_at(1) == "<unk>");
  CHECK(v.token_at(2) == "a");

  const std::vector<Essay> b{{1, 1, "x y", 5}};
  CHECK(build_vocab(b, 1).size() == 4);

  // Descending frequency, then lexicographic.
  const std::vector<Essay> c{{1, 1, "b c a c b c", 5}};
  const auto vc = build_vocab(c, 1);
  CHECK(vc.index_of("c") == 2);
  CHECK(vc.index_of("b") == 3);
  CHECK(vc.index_of("a") == 4);
  CHECK(vc.index_of("zzzzqqq") == Vocabulary::kUnknown);
  CHECK(build_vocab(c, 1) == vc);

  CHECK_THROWS_AS(build_vocab(std::vector<Essay>{}, 1), DomainError);
  CHECK_THROWS_AS(build_vocab(c, 0), ParameterError);
}

TEST_CASE("vocabulary JSON round trip") {
  const std::vector<Essay> c{{1, 1, "the cat sat on the mat.", 5}};
  const auto v = build_vocab(c, 1);
  CHECK(Vocabulary::from_json(v.to_json()) == v);
  CHECK_THROWS_AS(Vocabulary::from_json(nlohmann::json::array({"x"})), FormatError);
}

TEST_CASE("vocabulary without a prompt holds none of that prompt's private words") {
  SyntheticCorpusOptions o;
  o.essays_per_prompt = 30;
  const auto corpus = make_synthetic_corpus(o);
  for (int target : o.prompts) {
    std::vector<Essay> rest, held;
    for (const auto& e : corpus) (e.prompt_id == target ? held : rest).push_back(e);
    const auto vocab = build_vocab(rest, 1);
    std::set<std::string> elsewhere;
    for (const auto& e : rest) {
      for (const auto& s : tokenize_essay(e.text)) elsewhere.insert(s.begin(), s.end());
    }
    std::size_t private_words = 0;
    for (const auto& e : held) {
      for (const auto& s : tokenize_essay(e.text)) {
        for (const auto& t : s) {
          if (elsewhere.contains(t)) continue;
          ++private_words;
          CHECK_FALSE(vocab.contains(t));
        }
      }
    }
    CHECK(private_words > 0);
  }
}

TEST_CASE("load_embeddings") {
  const std::vector<Essay> c{{1, 1, "the cat", 5}};
  const auto vocab = build_vocab(c, 1);
  std::string line = "the";
  std::vector<double> expected;
  for (int i = 0; i < 50; ++i) {
    expected.push_back(0.1 + 0.01 * i);
    line += " " + std::to_string(expected.back());
  }
  std::string unrelated = "unrelated";
  for (int i = 0; i < 50; ++i) unrelated += " 1";
  const auto path = write_temp("gazeaeg_emb.txt", line + "\n" + unrelated + "\n");
  const auto m = load_embeddings(path, vocab, 50, 3);
  REQUIRE(m.dim(0) == vocab.size());
  REQUIRE(m.dim(1) == 50);
  const auto the = static_cast<std::size_t>(vocab.index_of("the"));
  const auto cat = static_cast<std::size_t>(vocab.index_of("cat"));
  for (std::size_t k = 0; k < 50; ++k) {
    CHECK(m.at(the, k) == doctest::Approx(expected[k]).epsilon(1e-12));
    CHECK(m.at(cat, k) >= -0.05);
    CHECK(m.at(cat, k) <= 0.05);
    CHECK(m.at(0, k) == 0.0);
  }
  std::filesystem::remove(path);

  std::string short_line = "the";
  for (int i = 0; i < 49; ++i) short_line += " 0.5";
  const auto bad = write_temp("gazeaeg_emb_bad.txt", short_line + "\n");
  try {
    load_embeddings(bad, vocab, 50, 3);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
  }
  std::filesystem::remove(bad);
  CHECK_THROWS_AS(load_embeddings("/nonexistent/emb.txt", vocab, 50, 3), IoError);
}

TEST_CASE("random_embeddings are deterministic with a zero padding row") {
  const std::vector<Essay> c{{1, 1, "a b c d", 5}};
  const auto vocab = build_vocab(c, 1);
  const auto a = random_embeddings(vocab, 8, 4);
  CHECK(a == random_embeddings(vocab, 8, 4));
  CHECK_FALSE(a == random_embeddings(vocab, 8, 5));
  for (std::size_t k = 0; k < 8; ++k) CHECK(a.at(0, k) == 0.0);
}

TEST_CASE("encode_essay") {
  const Essay e{7, 3, "One two three. Four five! Six zzzzqqq.", 3};
  const std::vector<Essay> train{{1, 1, "one two three four five six", 5}};
  const auto vocab = build_vocab(train, 1);
  const auto enc = encode_essay(e, vocab, PromptTable::asap(), {4, 5});
  CHECK(enc.sentence_mask == std::vector<std::uint8_t>{1, 1, 1, 0});
  CHECK(enc.target == 1.0);
  CHECK(enc.indices[enc.cell(2, 1)] == Vocabulary::kUnknown);
  CHECK(enc.sentence_length(0) == 4);
  CHECK(enc.sentence_length(1) == 3);
  CHECK(enc.active_tokens() == 10);
  CHECK(enc.flat_to_cell.size() == 10);

  SUBCASE("truncation") {
    const auto small = encode_essay(e, vocab, PromptTable::asap(), {2, 3});
    CHECK(small.active_sentences() == 2);
    CHECK(small.active_tokens() == 6);
    CHECK(small.flat_to_cell.size() == 10);
    CHECK(std::count(small.flat_to_cell.begin(), small.flat_to_cell.end(), -1) == 4);
  }
  CHECK_THROWS_AS(encode_essay({8, 1, "   ", 5}, vocab, PromptTable::asap()), EncodingError);
}

TEST_CASE("mask count equals min(length, limit) summed over kept sentences") {
  SyntheticCorpusOptions o;
  o.essays_per_prompt = 20;
  const auto corpus = make_synthetic_corpus(o);
  const auto vocab = build_vocab(corpus, 2);
  for (const EncodingLimits limits : {EncodingLimits{40, 50}, EncodingLimits{3, 6}, EncodingLimits{1, 1}}) {
    for (const auto& e : corpus) {
      const auto sentences = tokenize_essay(e.text);
      std::size_t expected = 0;
      for (std::size_t s = 0; s < std::min(sentences.size(), limits.max_sentences); ++s) {
        expected += std::min(sentences[s].size(), limits.max_tokens);
      }
      CHECK(encode_essay(e, vocab, PromptTable::asap(), limits).active_tokens() == expected);
    }
  }
}
