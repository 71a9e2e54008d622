// SPDX-License-Identifier: Apache-2.0
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "hproto/error.hpp"
#include "hproto/metrics.hpp"
#include "hproto/stats.hpp"

using namespace hproto;
using doctest::Approx;
using Labels = std::vector<std::uint8_t>;

TEST_CASE("confusion counts") {
  auto c = confusion(Labels{0, 1, 1, 0}, Labels{0, 1, 1, 0});
  CHECK(c.fp == 0);
  CHECK(c.fn == 0);
  CHECK(c.tp == 2);

  c = confusion(Labels{0, 0, 1, 1}, Labels{0, 0, 0, 0});
  CHECK(c == ConfusionCounts{0, 0, 2, 2});

  c = confusion(Labels{1, 0}, Labels{0, 1});
  CHECK(c == ConfusionCounts{0, 1, 0, 1});

  CHECK_THROWS_AS(confusion(Labels{0, 1}, Labels{0}), ValidationError);
  CHECK_THROWS_AS(confusion(Labels{0, 2}, Labels{0, 1}), ValidationError);
}

TEST_CASE("macro F1") {
  CHECK(macro_f1(confusion(Labels{0, 1, 1, 0}, Labels{0, 1, 1, 0})) == 1.0);
  // Class 0: tp=2 fp=2 fn=0 -> 4/6. Class 1 never predicted -> 0.
  const auto c = confusion(Labels{0, 0, 1, 1}, Labels{0, 0, 0, 0});
  CHECK(per_class_f1(c)[0] == Approx(2.0 / 3.0));
  CHECK(per_class_f1(c)[1] == 0.0);
  CHECK(macro_f1(c) == 1.0 / 3.0);
  CHECK(macro_f1(confusion(Labels{0, 1}, Labels{1, 0})) == 0.0);
}

TEST_CASE("metric invariants on random predictions") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 200; ++t) {
    Labels y(1 + rng() % 50), p(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = rng() & 1;
      p[i] = rng() & 1;
    }
    const auto c = confusion(y, p);
    CHECK(c.total() == y.size());
    CHECK(accuracy(c) == static_cast<double>(c.tp + c.tn) / y.size());
    Labels ys(y), ps(p);
    for (auto& v : ys) v ^= 1;
    for (auto& v : ps) v ^= 1;
    CHECK(macro_f1(confusion(ys, ps)) == Approx(macro_f1(c)).epsilon(1e-15));
    const double m = macro_f1(c);
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
    const auto f = per_class_f1(c);
    CHECK(m == (f[0] + f[1]) / 2.0);
  }
}

TEST_CASE("relative F1") {
  CHECK(relative_f1(0.7, 0.7) == 1.0);
  CHECK(relative_f1(60.0, 80.0) == 0.75);
  CHECK(relative_f1(0.9, 0.6) == Approx(1.5));
  CHECK_THROWS_AS(relative_f1(0.5, 0.0), ValidationError);
}

TEST_CASE("grouped accuracy") {
  using Cats = std::vector<std::optional<std::string>>;
  const Labels y{1, 0, 1, 1}, p{1, 0, 0, 1};
  auto g = grouped_accuracy(y, p, Cats(4, std::string("irony")));
  CHECK(g.size() == 1);
  CHECK(g["irony"] == accuracy(confusion(y, p)));

  g = grouped_accuracy(y, p, Cats{"irony", "irony", "incitement", "incitement"});
  CHECK(g["irony"] == 1.0);
  CHECK(g["incitement"] == 0.5);

  g = grouped_accuracy(Labels{0, 1}, Labels{0, 0}, Cats{std::nullopt, "irony"});
  CHECK(g[kUncategorized] == 1.0);
  CHECK(g["irony"] == 0.0);

  // 40 incitement samples with every fifth one wrong: planted rate 0.8.
  Labels yy, pp;
  Cats cats;
  for (int i = 0; i < 40; ++i) {
    yy.push_back(1);
    pp.push_back(i % 5 == 0 ? 0 : 1);
    cats.push_back("incitement");
    yy.push_back(0);
    pp.push_back(0);
    cats.push_back("irony");
  }
  g = grouped_accuracy(yy, pp, cats);
  CHECK(g["incitement"] == 0.8);
  CHECK(g["irony"] == 1.0);
}

TEST_CASE("paired t-test") {
  const std::vector<double> a{0.7, 0.8, 0.75, 0.9};
  auto r = paired_t_test(a, a);
  CHECK(r.t == 0.0);
  CHECK(r.p == 1.0);

  const std::vector<double> ones{2, 3, 4, 5}, base{1, 2, 3, 4};
  r = paired_t_test(ones, base);
  CHECK(std::isinf(r.t));
  CHECK(r.t > 0);
  CHECK(r.p == 0.0);
  r = paired_t_test(base, ones);
  CHECK(r.t < 0);
  CHECK(r.p == 0.0);

  // d = [1, 2, 3]: mean 2, sd 1, t = 2 sqrt(3). With df = 2 the two-sided
  // p-value has the closed form 1 - t / sqrt(2 + t^2).
  const std::vector<double> x{1, 2, 3}, z{0, 0, 0};
  r = paired_t_test(x, z);
  CHECK(r.t == Approx(2.0 * std::sqrt(3.0)).epsilon(1e-12));
  CHECK(r.t == Approx(3.4641).epsilon(1e-4));
  const double closed = 1.0 - r.t / std::sqrt(2.0 + r.t * r.t);
  CHECK(r.p == Approx(closed).epsilon(1e-10));
  CHECK(r.p == Approx(0.0742).epsilon(1e-3));

  CHECK_THROWS_AS(paired_t_test(std::vector<double>{1}, std::vector<double>{2}), ValidationError);
  CHECK_THROWS_AS(paired_t_test(x, std::vector<double>{1, 2}), ValidationError);
}

TEST_CASE("t distribution against boost") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> tdist(-8.0, 8.0);
  for (double df : {1.0, 2.0, 3.0, 9.0, 29.0, 99.0}) {
    boost::math::students_t dist(df);
    for (int i = 0; i < 50; ++i) {
      const double t = tdist(rng);
      const double expect = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
      CHECK(student_t_two_sided_p(t, df) == Approx(expect).epsilon(1e-9));
    }
  }
  std::uniform_real_distribution<double> ab(0.1, 30.0), xd(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double a = ab(rng), b = ab(rng), x = xd(rng);
    CHECK(regularized_incomplete_beta(a, b, x) ==
          Approx(boost::math::ibeta(a, b, x)).epsilon(1e-9));
  }
}
