#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gazeaeg/model.hpp"

namespace gazeaeg {

struct CheckResult {
  std::string name;
  double value = 0.0;  // error measure, or the computed quantity
  double limit = 0.0;
  bool passed = false;
};

// Central-difference checks of every differentiable primitive; value is
// the largest relative error.
std::vector<CheckResult> op_gradient_checks(double limit = 1e-4);

// Two-sentence toy essay with gaze labels, run through the full network
// in training mode with a fixed dropout stream. Some weights of the full
// network get gradients near 1e-10, where a 1e-5 step drowns in rounding,
// hence the larger default step.
EncodedEssay toy_essay();
ModelConfig toy_model_config(bool gaze_enabled, WordPooling pooling = WordPooling::Attention);
double network_gradient_error(const ModelConfig& config, const EncodedEssay& essay, std::uint64_t seed,
                              double eps = 1e-4);

// Gradient checks plus metric and optimizer checks against independent
// reference computations. Prints one line per check; true if all pass.
bool run_selftest(std::ostream& out);

}  // namespace gazeaeg
