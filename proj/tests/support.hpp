#pragma once

// Independent reference computations shared by the unit and acceptance tests.

#include <array>
#include <cmath>
#include <vector>

#include "gazeaeg/model.hpp"

namespace support {

// QWK from an explicitly built confusion matrix and outer-product expectation.
inline double confusion_qwk(const std::vector<int>& gold, const std::vector<int>& pred, int lo, int hi) {
  const auto k = static_cast<std::size_t>(hi - lo + 1);
  std::vector<std::vector<double>> observed(k, std::vector<double>(k, 0.0));
  std::vector<double> hist_g(k, 0.0), hist_p(k, 0.0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    observed[static_cast<std::size_t>(gold[i] - lo)][static_cast<std::size_t>(pred[i] - lo)] += 1.0;
    hist_g[static_cast<std::size_t>(gold[i] - lo)] += 1.0;
    hist_p[static_cast<std::size_t>(pred[i] - lo)] += 1.0;
  }
  const double n = static_cast<double>(gold.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double w = (static_cast<double>(i) - static_cast<double>(j)) * (static_cast<double>(i) - static_cast<double>(j)) /
                       ((static_cast<double>(k) - 1.0) * (static_cast<double>(k) - 1.0));
      num += w * observed[i][j];
      den += w * hist_g[i] * hist_p[j] / n;
    }
  }
  return den == 0.0 ? 1.0 : 1.0 - num / den;
}

// Two-sided Student-t p value by Simpson integration of the density.
inline double integrated_t_pvalue(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  const auto pdf = [&](double x) { return c * std::pow(1 + x * x / df, -(df + 1) / 2); };
  const int n = 200000;
  const double b = std::abs(t), h = b / n;
  double s = pdf(0.0) + pdf(b);
  for (int i = 1; i < n; ++i) s += pdf(i * h) * (i % 2 ? 4 : 2);
  return 1.0 - 2.0 * (s * h / 3.0);
}

// RMSProp with momentum on one scalar, written out longhand.
struct ScalarRmsProp {
  double lr = 0.001, rho = 0.9, momentum = 0.9, eps = 1e-8;
  double acc = 0.0, vel = 0.0;
  double step(double theta, double grad) {
    acc = rho * acc + (1.0 - rho) * grad * grad;
    vel = momentum * vel + lr * grad / std::sqrt(acc + eps);
    return theta - vel;
  }
};

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Sets the score head to a constant prediction `score` and each gaze head to
// the constant `gaze[a]`, so every per-task MSE is known in closed form.
inline void force_constant_heads(gazeaeg::ModelParams& params, double score,
                                 const std::array<double, gazeaeg::kGazeAttributeCount>& gaze) {
  auto& s = params.store;
  s.value(params.index.score_w).set_zero();
  s.value(params.index.score_b)[0] = logit(score);
  s.value(params.index.gaze_w).set_zero();
  for (std::size_t a = 0; a < gaze.size(); ++a) s.value(params.index.gaze_b)[a] = logit(gaze[a]);
}

// Masked MSE of a constant prediction against an essay's gaze grid.
inline double constant_gaze_mse(const gazeaeg::EncodedEssay& essay, std::size_t attr, double pred) {
  const auto cells = essay.sentences * essay.tokens;
  double total = 0.0;
  int count = 0;
  for (std::size_t c = 0; c < cells; ++c) {
    if (!essay.token_mask[c] || !essay.gaze->mask[c]) continue;
    const double d = pred - essay.gaze->values[attr * cells + c];
    total += d * d;
    ++count;
  }
  return count == 0 ? 0.0 : total / count;
}

}  // namespace support
