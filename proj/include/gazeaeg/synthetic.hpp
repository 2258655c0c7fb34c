#pragma once

#include <cstdint>
#include <vector>

#include "gazeaeg/dataset.hpp"

namespace gazeaeg {

// Parameters for a generated essay corpus in which the gold score is a
// noisy function of observable content statistics. Essays of every prompt
// share a pool of "strong" and "weak" words whose proportions track a
// latent quality, so scoring transfers across prompts; each prompt also
// has its own topic vocabulary that never appears elsewhere.
struct SyntheticCorpusOptions {
  std::vector<int> prompts{1, 2, 3, 4};
  std::size_t essays_per_prompt = 200;
  double score_noise = 0.07;
  std::uint64_t seed = 7;
  std::int64_t first_essay_id = 1;
};

std::vector<Essay> make_synthetic_corpus(const SyntheticCorpusOptions& options,
                                         const PromptTable& specs = PromptTable::asap());

}  // namespace gazeaeg
