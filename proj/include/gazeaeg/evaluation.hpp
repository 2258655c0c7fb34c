#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gazeaeg {

struct RatingPair {
  std::vector<int> gold;
  std::vector<int> pred;
  int min_rating = 0;
  int max_rating = 0;
};

// Quadratic weighted kappa over the rating range [min_rating, max_rating]
// (categories absent from both vectors still count). Two identical
// constant raters score 1.
double qwk(const RatingPair& pair);
double qwk(std::span<const int> gold, std::span<const int> pred, int min_rating, int max_rating);

struct CorrectClose {
  std::size_t correct = 0;  // exact agreement
  std::size_t close = 0;    // within one score point
  bool operator==(const CorrectClose&) const = default;
};

CorrectClose correct_close(std::span<const int> gold, std::span<const int> pred);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
};

// Two-sided paired Student t-test on x - y with n - 1 degrees of freedom.
// All-zero differences give t = 0, p = 1.
TTestResult paired_ttest_2tailed(std::span<const double> x, std::span<const double> y);

double student_t_cdf(double t, double degrees_of_freedom);

}  // namespace gazeaeg
