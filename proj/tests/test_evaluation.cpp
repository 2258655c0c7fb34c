#include <doctest.h>

#include "gazeaeg/error.hpp"
#include "gazeaeg/evaluation.hpp"
#include "gazeaeg/random.hpp"
#include "support.hpp"

using namespace gazeaeg;

using Ints = std::vector<int>;

TEST_CASE("qwk examples") {
  CHECK(qwk(Ints{1, 2, 3}, Ints{1, 2, 3}, 1, 3) == 1.0);
  CHECK(qwk(Ints{1, 3}, Ints{3, 1}, 1, 3) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(qwk(Ints{2, 2, 2}, Ints{2, 2, 2}, 1, 3) == 1.0);
  CHECK(qwk(Ints{0, 2}, Ints{2, 0}, 0, 2) == -1.0);
  CHECK(qwk(Ints{0, 1, 2}, Ints{1, 1, 1}, 0, 2) == 0.0);
  CHECK(qwk(Ints{1, 1, 2, 2}, Ints{1, 2, 1, 2}, 1, 2) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(qwk(RatingPair{{1, 2, 3}, {1, 2, 3}, 1, 3}) == 1.0);
  CHECK_THROWS_AS(qwk(Ints{1, 2}, Ints{1}, 1, 3), ContractError);
  CHECK_THROWS_AS(qwk(Ints{1, 5}, Ints{1, 2}, 1, 3), ContractError);
}

TEST_CASE("qwk agrees with the confusion-matrix oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const int lo = static_cast<int>(rng.below(5));
    const int hi = lo + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(60 - lo)));
    const auto n = 2 + rng.below(199);
    Ints gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
      pred[i] = rng.uniform() < 0.5 ? gold[i] : lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    }
    const double got = qwk(gold, pred, lo, hi);
    CHECK(std::abs(got - support::confusion_qwk(gold, pred, lo, hi)) <= 1e-12);
    CHECK(std::abs(got - qwk(pred, gold, lo, hi)) <= 1e-12);
    Ints g2 = gold, p2 = pred;
    for (auto& x : g2) x += 7;
    for (auto& x : p2) x += 7;
    CHECK(std::abs(got - qwk(g2, p2, lo + 7, hi + 7)) <= 1e-12);
  }
}

TEST_CASE("correct_close") {
  CHECK(correct_close(Ints{1, 2, 3}, Ints{1, 3, 5}) == CorrectClose{1, 2});
  CHECK(correct_close(Ints{}, Ints{}) == CorrectClose{0, 0});
  Ints gold, pred;
  for (int i = 0; i < 48; ++i) {
    gold.push_back(i % 4);
    pred.push_back(i < 29 ? i % 4 : (i < 45 ? i % 4 + 1 : i % 4 + 3));
  }
  CHECK(correct_close(gold, pred) == CorrectClose{29, 45});
  CHECK(correct_close(gold, gold) == CorrectClose{48, 48});
  CHECK_THROWS_AS(correct_close(Ints{1}, Ints{}), ContractError);
}

TEST_CASE("paired t-test") {
  const std::vector<double> x{2, 4, 6}, y{1, 2, 3};
  const auto r = paired_ttest_2tailed(x, y);
  CHECK(r.t == doctest::Approx(3.4641).epsilon(1e-4));
  CHECK(r.p == doctest::Approx(0.0742).epsilon(1e-2));
  CHECK(std::abs(r.p - support::integrated_t_pvalue(r.t, 2)) <= 1e-3);

  const auto back = paired_ttest_2tailed(y, x);
  CHECK(back.t == -r.t);
  CHECK(back.p == r.p);

  const auto same = paired_ttest_2tailed(x, x);
  CHECK(same.t == 0.0);
  CHECK(same.p == 1.0);

  // Constant nonzero differences have no variance.
  const std::vector<double> five{5, 5, 5}, zero{0, 0, 0};
  CHECK_THROWS_AS(paired_ttest_2tailed(five, zero), DomainError);
  CHECK_THROWS_AS(paired_ttest_2tailed(std::vector<double>{1}, std::vector<double>{2}), ContractError);
  CHECK_THROWS_AS(paired_ttest_2tailed(x, std::vector<double>{1, 2}), ContractError);
}

TEST_CASE("t-test p values agree with numeric integration") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = 3 + rng.below(10);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform();
      y[i] = rng.uniform() * 0.8;
    }
    const auto r = paired_ttest_2tailed(x, y);
    CHECK(r.p >= 0.0);
    CHECK(r.p <= 1.0);
    CHECK(std::abs(r.p - support::integrated_t_pvalue(r.t, static_cast<double>(n - 1))) <= 1e-6);
  }
  CHECK(student_t_cdf(0.0, 4) == doctest::Approx(0.5));
}
