#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "gazeaeg/error.hpp"
#include "gazeaeg/gaze.hpp"
#include "gazeaeg/random.hpp"
#include "gazeaeg/synthetic.hpp"

using namespace gazeaeg;

namespace {

// Bin by counting strictly smaller values, independent of sorting.
std::vector<int> count_oracle(const std::vector<double>& v, std::size_t bins) {
  std::vector<int> out;
  for (double x : v) {
    std::size_t below = 0;
    for (double y : v) below += y < x ? 1 : 0;
    out.push_back(static_cast<int>(below * bins / v.size()));
  }
  return out;
}

RawGazeRecord record(std::int64_t essay, int reader, std::size_t token, double dt, double ffd, double ir, double rc,
                     double skip) {
  RawGazeRecord r;
  r.essay_id = essay;
  r.reader_id = reader;
  r.token_index = token;
  r.values = {dt, ffd, ir, rc, skip};
  return r;
}

}  // namespace

TEST_CASE("quantile_bin examples") {
  CHECK(quantile_bin(std::vector<double>{10, 20, 30, 40}, 2) == std::vector<int>{0, 0, 1, 1});
  CHECK(quantile_bin(std::vector<double>{5, 5, 5}, 4) == std::vector<int>{0, 0, 0});
  const std::vector<double> v{3, 1, 4, 1, 5, 9, 2, 6};
  CHECK(quantile_bin(v, 4) == count_oracle(v, 4));
  CHECK(quantile_bin(v, 4) == std::vector<int>{1, 0, 2, 0, 2, 3, 1, 3});
  CHECK_THROWS_AS(quantile_bin(v, 1), ParameterError);
  CHECK_THROWS_AS(quantile_bin(std::vector<double>{}, 3), DomainError);
}

TEST_CASE("quantile_bin agrees with the counting oracle on random input") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng.below(60));
    for (auto& x : v) x = static_cast<double>(rng.below(20));  // many ties
    const auto bins = 2 + rng.below(7);
    CHECK(quantile_bin(v, bins) == count_oracle(v, bins));
  }
}

TEST_CASE("quantile_bin balances distinct values") {
  Rng rng(3);
  for (std::size_t bins : {2, 4, 5}) {
    std::vector<double> v(bins * 7);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) * 1.5;
    rng.shuffle(v.begin(), v.end());
    std::vector<int> counts(bins, 0);
    for (int b : quantile_bin(v, bins)) ++counts[static_cast<std::size_t>(b)];
    for (int c : counts) CHECK(c == 7);
  }
}

TEST_CASE("bin_and_scale examples") {
  SUBCASE("binary passthrough") {
    const std::vector<RawGazeRecord> r{record(1, 0, 0, 0, 0, 0, 0, 1), record(1, 0, 1, 200, 150, 1, 1, 0)};
    const auto m = bin_and_scale(r, 5);
    CHECK(m.at(1).values[index_of(GazeAttribute::Skip)] == std::vector<double>{1.0, 0.0});
    CHECK(m.at(1).values[index_of(GazeAttribute::IR)] == std::vector<double>{0.0, 1.0});
  }
  SUBCASE("equal DT gives zero labels") {
    std::vector<RawGazeRecord> r;
    for (std::size_t k = 0; k < 6; ++k) r.push_back(record(2, 0, k, 100, 80 + k, 0, 1, 0));
    const auto m = bin_and_scale(r, 5);
    for (double v : m.at(2).values[index_of(GazeAttribute::DT)]) CHECK(v == 0.0);
  }
  SUBCASE("two readers at opposite extremes average to 0.5") {
    const std::vector<RawGazeRecord> r{record(3, 0, 0, 100, 100, 0, 1, 0), record(3, 0, 1, 900, 300, 0, 3, 0),
                                       record(3, 1, 0, 800, 300, 0, 3, 0), record(3, 1, 1, 50, 40, 0, 1, 0)};
    const auto m = bin_and_scale(r, 2);
    CHECK(m.at(3).values[index_of(GazeAttribute::DT)][0] == 0.5);
    CHECK(m.at(3).values[index_of(GazeAttribute::DT)][1] == 0.5);
  }
}

TEST_CASE("bin_and_scale properties") {
  const std::vector<Essay> essays{{10, 1, "The quick brown fox jumps over the lazy dog. It was remarkable!", 6},
                                  {11, 1, "Reading behaviour differs between people.", 4}};
  std::vector<RawGazeRecord> records;
  for (const auto& e : essays) {
    const auto r = synth_gaze(e, 5);
    records.insert(records.end(), r.begin(), r.end());
  }
  const auto labels = bin_and_scale(records, 5);

  std::size_t covered = 0;
  for (const auto& [id, l] : labels) {
    for (std::size_t k = 0; k < l.size(); ++k) {
      covered += l.mask[k];
      for (const auto& attr : l.values) {
        CHECK(attr[k] >= 0.0);
        CHECK(attr[k] <= 1.0);
      }
    }
  }
  std::set<std::pair<std::int64_t, std::size_t>> keys;
  for (const auto& r : records) keys.insert({r.essay_id, r.token_index});
  CHECK(covered == keys.size());

  // Monotone transform of one reader's durations leaves labels unchanged.
  auto warped = records;
  for (auto& r : warped) {
    if (r.reader_id != 1 || r[GazeAttribute::Skip] == 1) continue;
    r[GazeAttribute::DT] = std::sqrt(r[GazeAttribute::DT]) * 7.0 + 3.0;
    r[GazeAttribute::FFD] = r[GazeAttribute::FFD] * r[GazeAttribute::FFD];
  }
  const auto again = bin_and_scale(warped, 5);
  for (const auto& [id, l] : labels) {
    CHECK(again.at(id).values == l.values);
    CHECK(again.at(id).mask == l.mask);
  }
}

TEST_CASE("validate_record") {
  CHECK_NOTHROW(validate_record(record(1, 0, 0, 200, 150, 1, 2, 0)));
  CHECK_THROWS_AS(validate_record(record(1, 0, 0, -1, 0, 0, 0, 0)), ValidationError);
  CHECK_THROWS_AS(validate_record(record(1, 0, 0, 1, 1, 0.5, 1, 0)), ValidationError);
  CHECK_THROWS_AS(validate_record(record(1, 0, 0, 1, 1, 0, 1.5, 0)), ValidationError);
  CHECK_THROWS_AS(validate_record(record(1, 0, 0, 100, 0, 0, 1, 1)), ValidationError);
  CHECK_THROWS_AS(validate_record(record(1, 0, 0, std::nan(""), 0, 0, 1, 0)), ValidationError);
}

TEST_CASE("align_gaze") {
  const Essay e{5, 1, "one two three four five six", 6};
  const std::vector<Essay> corpus{e};
  const auto vocab = build_vocab(corpus, 1);
  const auto enc = encode_essay(e, vocab, PromptTable::asap(), {2, 8});

  GazeLabels full;
  full.resize(6);
  for (std::size_t k = 0; k < 6; ++k) {
    full.mask[k] = 1;
    full.values[0][k] = 0.25;
  }
  const auto grid = align_gaze({{5, full}}, enc);
  for (std::size_t t = 0; t < 6; ++t) CHECK(grid.mask[enc.cell(0, t)] == 1);
  CHECK(std::accumulate(grid.mask.begin(), grid.mask.end(), 0) == 6);
  CHECK(grid.values[enc.cell(0, 3)] == 0.25);

  const auto none = align_gaze({}, enc);
  CHECK(std::accumulate(none.mask.begin(), none.mask.end(), 0) == 0);

  GazeLabels far;
  far.resize(100);
  far.mask[99] = 1;
  CHECK_THROWS_AS(align_gaze({{5, far}}, enc), AlignmentError);

  // Truncated tokens are dropped rather than shifted.
  const auto small = encode_essay(e, vocab, PromptTable::asap(), {1, 4});
  const auto cut = align_gaze({{5, full}}, small);
  CHECK(std::accumulate(cut.mask.begin(), cut.mask.end(), 0) == 4);
}

TEST_CASE("synth_gaze") {
  const Essay e{8, 2, "Computers are helpful tools. Some people disagree!", 3};
  const auto a = synth_gaze(e, 12);
  CHECK(a == synth_gaze(e, 12));
  CHECK_FALSE(a == synth_gaze(e, 13));
  for (const auto& r : a) {
    CHECK_NOTHROW(validate_record(r));
    if (r[GazeAttribute::Skip] == 1) {
      CHECK(r[GazeAttribute::DT] == 0);
      CHECK(r[GazeAttribute::FFD] == 0);
      CHECK(r[GazeAttribute::RC] == 0);
    }
  }
  CHECK(synth_gaze({9, 1, "word", 5}, 1, {3}).size() == 3);
  const auto one = synth_gaze({9, 1, "word", 5}, 1, {1});
  REQUIRE(one.size() == 1);
  CHECK(one[0].token_index == 0);
}

TEST_CASE("synthetic gaze tracks word length") {
  SyntheticCorpusOptions o;
  o.essays_per_prompt = 20;
  const auto corpus = make_synthetic_corpus(o);
  double long_dt = 0, short_dt = 0;
  std::size_t long_n = 0, short_n = 0;
  for (const auto& e : corpus) {
    std::vector<std::string> tokens;
    for (auto& s : tokenize_essay(e.text)) tokens.insert(tokens.end(), s.begin(), s.end());
    for (const auto& r : synth_gaze(e, 4)) {
      const auto len = tokens[r.token_index].size();
      if (len >= 8) {
        long_dt += r[GazeAttribute::DT];
        ++long_n;
      } else if (len <= 3) {
        short_dt += r[GazeAttribute::DT];
        ++short_n;
      }
    }
  }
  REQUIRE(long_n > 0);
  REQUIRE(short_n > 0);
  CHECK(long_dt / long_n > 1.5 * (short_dt / short_n));
}

TEST_CASE("gaze TSV round trip and errors") {
  const Essay e{8, 2, "Computers are helpful tools.", 3};
  const auto records = synth_gaze(e, 2);
  std::stringstream buf;
  write_gaze_tsv(buf, records);
  CHECK(read_gaze_tsv(buf) == records);

  std::istringstream missing("essay_id\treader_id\ttoken_index\tDT\tFFD\tIR\tRC\n1\t0\t0\t1\t1\t0\t1\n");
  CHECK_THROWS_AS(read_gaze_tsv(missing), FormatError);
  std::istringstream bad("essay_id\treader_id\ttoken_index\tDT\tFFD\tIR\tRC\tSkip\n1\t0\t0\tx\t1\t0\t1\t0\n");
  CHECK_THROWS_AS(read_gaze_tsv(bad), ParseError);
  CHECK(parse_gaze_attribute("Skip") == GazeAttribute::Skip);
  CHECK_THROWS_AS(parse_gaze_attribute("pupil"), ParseError);
}
