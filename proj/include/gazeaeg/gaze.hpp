#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "gazeaeg/dataset.hpp"
#include "gazeaeg/textprep.hpp"

namespace gazeaeg {

// Reading-behaviour measurements per word interest area.
//   DT   dwell time: total fixation time on the word (ms)
//   FFD  first fixation duration (ms)
//   IR   IsRegression: a regression departed from the word (0/1)
//   RC   run count: number of times the word was fixated
//   Skip the word was never fixated (0/1)
enum class GazeAttribute : std::uint8_t { DT, FFD, IR, RC, Skip };

inline constexpr std::size_t kGazeAttributeCount = 5;
inline constexpr std::array<GazeAttribute, kGazeAttributeCount> kGazeAttributes{
    GazeAttribute::DT, GazeAttribute::FFD, GazeAttribute::IR, GazeAttribute::RC, GazeAttribute::Skip};

constexpr std::size_t index_of(GazeAttribute a) { return static_cast<std::size_t>(a); }
constexpr bool is_binary(GazeAttribute a) { return a == GazeAttribute::IR || a == GazeAttribute::Skip; }
std::string_view to_string(GazeAttribute a);
GazeAttribute parse_gaze_attribute(std::string_view name);

struct RawGazeRecord {
  std::int64_t essay_id = 0;
  int reader_id = 0;
  std::size_t token_index = 0;
  std::array<double, kGazeAttributeCount> values{};

  double& operator[](GazeAttribute a) { return values[index_of(a)]; }
  double operator[](GazeAttribute a) const { return values[index_of(a)]; }
  bool operator==(const RawGazeRecord&) const = default;
};

// Throws ValidationError unless values are finite and non-negative, IR and
// Skip are 0/1, RC is integral and a skipped word has no fixations.
void validate_record(const RawGazeRecord& record);

// Binned-and-scaled labels of one essay, indexed by textprep token.
struct GazeLabels {
  std::array<std::vector<double>, kGazeAttributeCount> values;
  std::vector<std::uint8_t> mask;

  std::size_t size() const { return mask.size(); }
  void resize(std::size_t n);
};

using GazeLabelMap = std::map<std::int64_t, GazeLabels>;

// Equal-frequency bin of every value: a value whose lowest rank among the
// sorted input is r lands in bin floor(r * bin_count / n).
std::vector<int> quantile_bin(std::span<const double> values, std::size_t bin_count);

// Bins DT, FFD and RC per reader, scales bins to [0, 1] with
// bin / (bin_count - 1), passes IR and Skip through, and averages readers
// that cover the same token.
GazeLabelMap bin_and_scale(std::span<const RawGazeRecord> records, std::size_t bin_count = 5);

// Places an essay's labels on its encoded grid. Tokens dropped by
// truncation and padded cells stay masked out.
GazeGrid align_gaze(const GazeLabelMap& labels, const EncodedEssay& essay);

struct SynthGazeOptions {
  std::size_t readers = 3;
};

// Deterministic, plausible reading records for one essay: longer and
// first-seen words are fixated longer and more often and skipped less.
std::vector<RawGazeRecord> synth_gaze(const Essay& essay, std::uint64_t seed, const SynthGazeOptions& options = {});

// synth_gaze over `count` essays drawn from the corpus by seed.
std::vector<RawGazeRecord> synth_gaze_corpus(std::span<const Essay> corpus, std::uint64_t seed, std::size_t count,
                                             const SynthGazeOptions& options = {});

// TSV with header essay_id reader_id token_index DT FFD IR RC Skip.
std::vector<RawGazeRecord> read_gaze_tsv(std::istream& in);
std::vector<RawGazeRecord> read_gaze_tsv(const std::filesystem::path& path);
void write_gaze_tsv(std::ostream& out, std::span<const RawGazeRecord> records);
void write_gaze_tsv(const std::filesystem::path& path, std::span<const RawGazeRecord> records);

}  // namespace gazeaeg
