#include "gazeaeg/gaze.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "gazeaeg/error.hpp"
#include "gazeaeg/random.hpp"

namespace gazeaeg {

namespace {
constexpr std::array<std::string_view, kGazeAttributeCount> kNames{"DT", "FFD", "IR", "RC", "Skip"};
}

std::string_view to_string(GazeAttribute a) { return kNames[index_of(a)]; }

GazeAttribute parse_gaze_attribute(std::string_view name) {
  for (auto a : kGazeAttributes) {
    if (to_string(a) == name) return a;
  }
  throw ParseError("unknown gaze attribute '" + std::string(name) + "'");
}

void validate_record(const RawGazeRecord& r) {
  const auto where = [&] {
    return "gaze record (essay " + std::to_string(r.essay_id) + ", reader " + std::to_string(r.reader_id) +
           ", token " + std::to_string(r.token_index) + ")";
  };
  for (auto a : kGazeAttributes) {
    const double v = r[a];
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError(where() + ": " + std::string(to_string(a)) + " must be finite and non-negative");
    }
    if (is_binary(a) && v != 0.0 && v != 1.0) {
      throw ValidationError(where() + ": " + std::string(to_string(a)) + " must be 0 or 1");
    }
  }
  if (r[GazeAttribute::RC] != std::floor(r[GazeAttribute::RC])) {
    throw ValidationError(where() + ": RC must be a whole number");
  }
  if (r[GazeAttribute::Skip] == 1.0 &&
      (r[GazeAttribute::DT] != 0.0 || r[GazeAttribute::FFD] != 0.0 || r[GazeAttribute::RC] != 0.0)) {
    throw ValidationError(where() + ": skipped word cannot have fixations");
  }
}

void GazeLabels::resize(std::size_t n) {
  for (auto& v : values) v.resize(n, 0.0);
  mask.resize(n, 0);
}

std::vector<int> quantile_bin(std::span<const double> values, std::size_t bin_count) {
  if (bin_count < 2) throw ParameterError("bin_count must be at least 2");
  if (values.empty()) throw DomainError("cannot bin an empty sequence");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  std::vector<int> bins;
  bins.reserve(n);
  for (double v : values) {
    const auto rank = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
    bins.push_back(static_cast<int>(rank * bin_count / n));
  }
  return bins;
}

GazeLabelMap bin_and_scale(std::span<const RawGazeRecord> records, std::size_t bin_count) {
  if (bin_count < 2) throw ParameterError("bin_count must be at least 2");
  for (const auto& r : records) validate_record(r);

  std::map<int, std::vector<std::size_t>> by_reader;
  for (std::size_t i = 0; i < records.size(); ++i) by_reader[records[i].reader_id].push_back(i);

  std::vector<std::array<double, kGazeAttributeCount>> scaled(records.size());
  const double top = static_cast<double>(bin_count - 1);
  for (const auto& [reader, rows] : by_reader) {
    for (auto a : kGazeAttributes) {
      const auto ai = index_of(a);
      if (is_binary(a)) {
        for (auto i : rows) scaled[i][ai] = records[i].values[ai];
        continue;
      }
      std::vector<double> raw;
      raw.reserve(rows.size());
      for (auto i : rows) raw.push_back(records[i].values[ai]);
      const auto bins = quantile_bin(raw, bin_count);
      for (std::size_t k = 0; k < rows.size(); ++k) scaled[rows[k]][ai] = bins[k] / top;
    }
  }

  // Average over readers of each (essay, token).
  std::map<std::pair<std::int64_t, std::size_t>, std::pair<std::array<double, kGazeAttributeCount>, int>> acc;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& [sum, count] = acc[{records[i].essay_id, records[i].token_index}];
    for (std::size_t a = 0; a < kGazeAttributeCount; ++a) sum[a] += scaled[i][a];
    ++count;
  }
  GazeLabelMap out;
  for (const auto& [key, entry] : acc) {
    auto& labels = out[key.first];
    if (labels.size() <= key.second) labels.resize(key.second + 1);
    for (std::size_t a = 0; a < kGazeAttributeCount; ++a) {
      labels.values[a][key.second] = entry.first[a] / entry.second;
    }
    labels.mask[key.second] = 1;
  }
  return out;
}

GazeGrid align_gaze(const GazeLabelMap& labels, const EncodedEssay& essay) {
  const auto cells = essay.sentences * essay.tokens;
  GazeGrid grid;
  grid.values.assign(kGazeAttributeCount * cells, 0.0);
  grid.mask.assign(cells, 0);
  const auto it = labels.find(essay.essay_id);
  if (it == labels.end()) return grid;
  const auto& l = it->second;
  const auto count = essay.flat_to_cell.size();
  for (std::size_t k = 0; k < l.size(); ++k) {
    if (!l.mask[k]) continue;
    if (k >= count) {
      throw AlignmentError("essay " + std::to_string(essay.essay_id) + ": gaze label at token " + std::to_string(k) +
                           " but the essay has " + std::to_string(count) + " tokens");
    }
    const auto c = essay.flat_to_cell[k];
    if (c < 0) continue;
    const auto cell = static_cast<std::size_t>(c);
    grid.mask[cell] = 1;
    for (std::size_t a = 0; a < kGazeAttributeCount; ++a) grid.values[a * cells + cell] = l.values[a][k];
  }
  return grid;
}

std::vector<RawGazeRecord> synth_gaze(const Essay& essay, std::uint64_t seed, const SynthGazeOptions& options) {
  std::vector<std::string> tokens;
  for (auto& sentence : tokenize_essay(essay.text)) {
    for (auto& t : sentence) tokens.push_back(std::move(t));
  }
  std::vector<RawGazeRecord> out;
  out.reserve(tokens.size() * options.readers);
  for (std::size_t reader = 0; reader < options.readers; ++reader) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(essay.essay_id), reader));
    // Reader idiosyncrasy: a global reading-speed factor.
    const double speed = rng.uniform(0.75, 1.35);
    std::unordered_set<std::string> seen;
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      const auto& tok = tokens[k];
      const bool punct = tok.size() == 1 && std::ispunct(static_cast<unsigned char>(tok[0]));
      const bool first = seen.insert(tok).second;
      const double difficulty = std::min(tok.size(), std::size_t{14}) / 14.0 + (first ? 0.15 : 0.0);
      const double p_skip = punct ? 0.85 : std::clamp(0.55 - 0.9 * difficulty, 0.02, 0.9);

      RawGazeRecord r;
      r.essay_id = essay.essay_id;
      r.reader_id = static_cast<int>(reader);
      r.token_index = k;
      if (rng.bernoulli(p_skip)) {
        r[GazeAttribute::Skip] = 1.0;
      } else {
        const double runs = 1.0 + (rng.bernoulli(0.15 + 0.5 * difficulty) ? 1.0 : 0.0) +
                            (rng.bernoulli(0.2 * difficulty) ? 1.0 : 0.0);
        const double ffd = std::max(50.0, speed * (140.0 + 90.0 * difficulty + 20.0 * rng.normal()));
        const double refix = speed * (110.0 + 80.0 * difficulty) * (runs - 1.0);
        r[GazeAttribute::FFD] = std::round(ffd);
        r[GazeAttribute::DT] = std::round(ffd + std::max(0.0, refix + 15.0 * rng.normal()));
        r[GazeAttribute::RC] = runs;
        r[GazeAttribute::IR] = rng.bernoulli(0.05 + 0.25 * difficulty) ? 1.0 : 0.0;
      }
      out.push_back(r);
    }
  }
  return out;
}

std::vector<RawGazeRecord> synth_gaze_corpus(std::span<const Essay> corpus, std::uint64_t seed, std::size_t count,
                                             const SynthGazeOptions& options) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x6A7EULL));
  rng.shuffle(order.begin(), order.end());
  order.resize(std::min(count, order.size()));
  std::sort(order.begin(), order.end());
  std::vector<RawGazeRecord> out;
  for (auto i : order) {
    auto records = synth_gaze(corpus[i], seed, options);
    out.insert(out.end(), records.begin(), records.end());
  }
  return out;
}

namespace {

template <typename T>
T parse_field(std::string_view s, std::size_t line, const char* column) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError("gaze TSV line " + std::to_string(line) + ": bad " + column + " '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::vector<RawGazeRecord> read_gaze_tsv(std::istream& in) {
  static constexpr std::array<std::string_view, 8> kColumns{"essay_id", "reader_id", "token_index", "DT",
                                                            "FFD",      "IR",        "RC",          "Skip"};
  std::string line;
  if (!std::getline(in, line)) throw FormatError("gaze TSV is empty; a header row is required");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string col;
    while (std::getline(hs, col, '\t')) header.push_back(col);
  }
  std::array<std::size_t, 8> pos{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    const auto it = std::find(header.begin(), header.end(), kColumns[c]);
    if (it == header.end()) throw FormatError("missing column '" + std::string(kColumns[c]) + "' in gaze TSV header");
    pos[c] = static_cast<std::size_t>(it - header.begin());
  }
  std::vector<RawGazeRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() < header.size()) {
      throw FormatError("gaze TSV line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " fields");
    }
    RawGazeRecord r;
    r.essay_id = parse_field<std::int64_t>(fields[pos[0]], line_no, "essay_id");
    r.reader_id = parse_field<int>(fields[pos[1]], line_no, "reader_id");
    r.token_index = parse_field<std::size_t>(fields[pos[2]], line_no, "token_index");
    for (std::size_t a = 0; a < kGazeAttributeCount; ++a) {
      r.values[a] = parse_field<double>(fields[pos[3 + a]], line_no, kColumns[3 + a].data());
    }
    validate_record(r);
    records.push_back(r);
  }
  return records;
}

std::vector<RawGazeRecord> read_gaze_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open gaze file " + path.string());
  return read_gaze_tsv(in);
}

void write_gaze_tsv(std::ostream& out, std::span<const RawGazeRecord> records) {
  out << std::setprecision(17);
  out << "essay_id\treader_id\ttoken_index\tDT\tFFD\tIR\tRC\tSkip\n";
  for (const auto& r : records) {
    out << r.essay_id << '\t' << r.reader_id << '\t' << r.token_index;
    for (double v : r.values) out << '\t' << v;
    out << '\n';
  }
}

void write_gaze_tsv(const std::filesystem::path& path, std::span<const RawGazeRecord> records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_gaze_tsv(out, records);
}

}  // namespace gazeaeg
