#include "gazeaeg/evaluation.hpp"

#include <cmath>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "gazeaeg/error.hpp"

namespace gazeaeg {

double qwk(std::span<const int> gold, std::span<const int> pred, int min_rating, int max_rating) {
  if (gold.size() != pred.size()) {
    throw ContractError("qwk: rating vectors differ in length (" + std::to_string(gold.size()) + " vs " +
                        std::to_string(pred.size()) + ")");
  }
  if (gold.empty()) throw ContractError("qwk: rating vectors are empty");
  if (min_rating > max_rating) throw ContractError("qwk: min_rating exceeds max_rating");
  const auto categories = static_cast<std::size_t>(max_rating - min_rating + 1);
  std::vector<double> observed(categories * categories, 0.0);
  std::vector<double> gold_hist(categories, 0.0);
  std::vector<double> pred_hist(categories, 0.0);
  for (std::size_t k = 0; k < gold.size(); ++k) {
    for (int r : {gold[k], pred[k]}) {
      if (r < min_rating || r > max_rating) {
        throw ContractError("qwk: rating " + std::to_string(r) + " outside [" + std::to_string(min_rating) + ", " +
                            std::to_string(max_rating) + "]");
      }
    }
    const auto i = static_cast<std::size_t>(gold[k] - min_rating);
    const auto j = static_cast<std::size_t>(pred[k] - min_rating);
    observed[i * categories + j] += 1.0;
    gold_hist[i] += 1.0;
    pred_hist[j] += 1.0;
  }
  if (categories == 1) return 1.0;

  const double n = static_cast<double>(gold.size());
  const double span2 = static_cast<double>((categories - 1) * (categories - 1));
  double disagreement = 0.0;
  double chance = 0.0;
  for (std::size_t i = 0; i < categories; ++i) {
    for (std::size_t j = 0; j < categories; ++j) {
      const double d = static_cast<double>(i) - static_cast<double>(j);
      const double w = d * d / span2;
      disagreement += w * observed[i * categories + j];
      chance += w * gold_hist[i] * pred_hist[j] / n;
    }
  }
  if (chance == 0.0) return 1.0;
  return 1.0 - disagreement / chance;
}

double qwk(const RatingPair& pair) { return qwk(pair.gold, pair.pred, pair.min_rating, pair.max_rating); }

CorrectClose correct_close(std::span<const int> gold, std::span<const int> pred) {
  if (gold.size() != pred.size()) throw ContractError("correct_close: vectors differ in length");
  CorrectClose out;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    const int d = std::abs(gold[k] - pred[k]);
    out.correct += d == 0 ? 1 : 0;
    out.close += d <= 1 ? 1 : 0;
  }
  return out;
}

double student_t_cdf(double t, double degrees_of_freedom) {
  if (!(degrees_of_freedom > 0.0)) throw DomainError("t distribution needs positive degrees of freedom");
  const boost::math::students_t_distribution<double> dist(degrees_of_freedom);
  return boost::math::cdf(dist, t);
}

TTestResult paired_ttest_2tailed(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("paired t-test: samples differ in length");
  const auto n = x.size();
  if (n < 2) throw ContractError("paired t-test needs at least two pairs");
  std::vector<double> d(n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = x[i] - y[i];
    mean += d[i];
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  bool all_zero = true;
  for (double v : d) {
    ss += (v - mean) * (v - mean);
    all_zero = all_zero && v == 0.0;
  }
  if (all_zero) return {0.0, 1.0};
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) {
    throw DomainError("paired t-test: differences have zero variance but nonzero mean " + std::to_string(mean));
  }
  TTestResult r;
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p = std::min(1.0, 2.0 * student_t_cdf(-std::abs(r.t), static_cast<double>(n - 1)));
  return r;
}

}  // namespace gazeaeg
