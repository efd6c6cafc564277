#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "rrg/stats/binomial.hpp"
#include "rrg/stats/glm.hpp"
#include "rrg/stats/kappa.hpp"
#include "rrg/stats/ratings.hpp"

using namespace rrg::stats;

namespace {

// Scott's pi for two raters, computed from pooled marginals.
double scotts_pi(const std::vector<int>& a, const std::vector<int>& b, std::size_t k) {
  std::vector<double> pooled(k, 0.0);
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pooled[static_cast<std::size_t>(a[i])] += 1.0;
    pooled[static_cast<std::size_t>(b[i])] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  double pe = 0.0;
  for (double c : pooled) pe += (c / (2.0 * a.size())) * (c / (2.0 * a.size()));
  const double po = agree / static_cast<double>(a.size());
  return (po - pe) / (1.0 - pe);
}

double log_likelihood_groups(const std::vector<std::pair<double, double>>& groups) {
  // groups of (successes, trials) at their own MLE
  double ll = 0.0;
  for (auto [s, n] : groups) {
    const double p = s / n;
    if (s > 0) ll += s * std::log(p);
    if (n - s > 0) ll += (n - s) * std::log(1.0 - p);
  }
  return ll;
}

}  // namespace

TEST_CASE("exact binomial test reproduces the published table") {
  CHECK(std::abs(exact_binomial_test(161, 360, 0.5) - 0.051) <= 0.003);
  CHECK(std::abs(exact_binomial_test(33, 99, 0.5) - 0.001) <= 0.0005);
  CHECK(exact_binomial_test(48, 96, 0.5) == 1.0);
  const std::vector<std::tuple<int, int, double>> rows = {
      {47, 102, 0.488}, {47, 108, 0.211}, {45, 99, 0.422},
      {43, 96, 0.358},  {56, 117, 0.712}, {44, 99, 0.315}};
  for (auto [k, n, p] : rows) {
    CAPTURE(k);
    CHECK(std::abs(exact_binomial_test(k, n, 0.5) - p) <= 0.02);
    CHECK(std::abs(exact_binomial_test(k, n, 0.5) - p) <= 0.0006);  // rounding of the printed value
  }
}

TEST_CASE("exact binomial test properties") {
  for (int n = 1; n < 60; n += 7) {
    for (int k = 0; k <= n; ++k) {
      const double p = exact_binomial_test(k, n, 0.5);
      CHECK(p == doctest::Approx(exact_binomial_test(n - k, n, 0.5)).epsilon(1e-12));
      CHECK(p > 0.0);
      CHECK(p <= 1.0);
    }
  }
  // one-sided tails by direct summation
  CHECK(exact_binomial_test(3, 3, 0.5, Alternative::greater) == doctest::Approx(0.125));
  CHECK(exact_binomial_test(1, 3, 0.5, Alternative::greater) == doctest::Approx(0.875));
  CHECK(exact_binomial_test(0, 3, 0.5, Alternative::less) == doctest::Approx(0.125));
  CHECK(exact_binomial_test(2, 4, 0.3, Alternative::less) == doctest::Approx(0.9163).epsilon(1e-12));
  // two-sided at p0 = 0.3, n = 4: pmf .2401 .4116 .2646 .0756 .0081; k = 3 sums 3 and 4
  CHECK(exact_binomial_test(3, 4, 0.3) == doctest::Approx(0.0837).epsilon(1e-12));
  CHECK_THROWS_AS(exact_binomial_test(5, 4, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(exact_binomial_test(1, 4, 1.0), std::invalid_argument);
  CHECK(alternative_from_string("less") == Alternative::less);
  CHECK_THROWS_AS(alternative_from_string("both"), std::invalid_argument);
}

TEST_CASE("binomial power") {
  const double p1 = 199.0 / 360.0;
  CHECK(std::abs(binomial_power(360, 0.5, p1, 0.05) - 0.608) <= 0.015);
  CHECK(std::abs(binomial_power(600, 0.5, p1, 0.05) - 0.823) <= 0.015);
  CHECK(std::abs(binomial_power(720, 0.5, p1, 0.05) - 0.879) <= 0.015);
  // frozen exact values of the same computation
  CHECK(binomial_power(360, 0.5, p1, 0.05) == doctest::Approx(0.6051).epsilon(1e-3));
  CHECK(binomial_power(600, 0.5, p1, 0.05) == doctest::Approx(0.8205).epsilon(1e-3));
  CHECK(binomial_power(720, 0.5, p1, 0.05) == doctest::Approx(0.8773).epsilon(1e-3));
  // n = 5, p0 = .5: P(X >= 5) = 1/32 <= .05 < P(X >= 4) = 6/32, so power = p1^5
  CHECK(binomial_power(5, 0.5, 0.8, 0.05) == doctest::Approx(std::pow(0.8, 5)));
  CHECK(binomial_power(5, 0.5, 0.2, 0.05, Alternative::less) == doctest::Approx(std::pow(0.8, 5)));
  CHECK_THROWS_AS(binomial_power(3, 0.5, 0.8, 0.05), std::domain_error);
  double last = 0.0;
  for (std::uint64_t n = 20; n <= 400; n += 20) {
    const double pw = binomial_power(n, 0.5, 0.6, 0.05);
    // exact tests are not monotone step by step, but over this grid they are
    CHECK(pw >= last - 0.03);
    last = pw;
  }
  double prev = 0.0;
  for (double q = 0.52; q < 0.99; q += 0.04) {
    const double pw = binomial_power(200, 0.5, q, 0.05);
    CHECK(pw >= prev);
    prev = pw;
  }
  const double two = binomial_power(360, 0.5, p1, 0.05, Alternative::two_sided);
  CHECK(two < binomial_power(360, 0.5, p1, 0.05));
  CHECK(two > 0.0);
}

TEST_CASE("fleiss kappa") {
  // P-bar = 2/3, P-e = 5/9
  const auto hand = fleiss_kappa_counts({{3, 0}, {1, 2}});
  CHECK(std::abs(hand.kappa - 0.25) < 1e-10);
  CHECK(hand.agreement == doctest::Approx(2.0 / 3.0));
  CHECK(fleiss_kappa({{0, 0, 0}, {1, 1, 1}, {2, 2, 2}}, 3).kappa == doctest::Approx(1.0));
  CHECK_THROWS_AS(fleiss_kappa({{1, 1}, {1, 1}}, 2), UndefinedKappa);
  CHECK_THROWS_AS(fleiss_kappa_counts({{3, 0}, {1, 1}}), std::invalid_argument);

  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cat(0, 2);
  double sum = 0.0;
  int reject = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    std::vector<std::vector<int>> r(60, std::vector<int>(3));
    for (auto& row : r) {
      for (int& v : row) v = cat(rng);
    }
    const auto k = fleiss_kappa(r, 3);
    sum += k.kappa;
    if (k.p < 0.05) ++reject;
    CHECK(k.kappa <= 1.0);
    CHECK(k.p >= 0.0);
    CHECK(k.p <= 1.0);
  }
  CHECK(std::abs(sum / trials) < 0.01);
  CHECK(reject < trials / 10);  // null SE keeps the size near 5%

  // Two raters: Fleiss' kappa is Scott's pi; it equals Cohen's kappa when the
  // two raters have the same marginals.
  for (int t = 0; t < 100; ++t) {
    std::vector<int> a(40), b(40);
    for (int& v : a) v = cat(rng);
    for (int& v : b) v = cat(rng);
    std::vector<std::vector<int>> items;
    for (std::size_t i = 0; i < a.size(); ++i) items.push_back({a[i], b[i]});
    const double fk = fleiss_kappa(items, 3).kappa;
    CHECK(std::abs(fk - scotts_pi(a, b, 3)) < 1e-10);
    // swapping b's labels on a permutation keeps marginals equal to a's
    std::vector<int> c = a;
    std::shuffle(c.begin(), c.end(), rng);
    std::vector<std::vector<int>> same;
    for (std::size_t i = 0; i < a.size(); ++i) same.push_back({a[i], c[i]});
    CHECK(std::abs(fleiss_kappa(same, 3).kappa - cohen_kappa(a, c, 3)) < 1e-10);
  }

  const auto pairs = pairwise_kappa({{0, 0, 1}, {1, 1, 1}, {2, 2, 0}, {0, 1, 0}}, 3);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0].rater_a == 0);
  CHECK(pairs[0].rater_b == 1);
  CHECK(pairs[2].rater_a == 1);
}

TEST_CASE("logistic glm on 2x2 tables matches the log odds ratio") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> cell(1, 40);
  for (int t = 0; t < 100; ++t) {
    const int a = cell(rng), b = cell(rng), c = cell(rng), d = cell(rng);
    // a: x=1,y=1  b: x=1,y=0  c: x=0,y=1  d: x=0,y=0
    std::vector<double> x, y;
    auto add = [&](int n, double xv, double yv) {
      for (int i = 0; i < n; ++i) {
        x.push_back(xv);
        y.push_back(yv);
      }
    };
    add(a, 1, 1);
    add(b, 1, 0);
    add(c, 0, 1);
    add(d, 0, 0);
    const auto design = DesignMatrix::from_columns({{"(intercept)", std::vector<double>(x.size(), 1.0)}, {"x", x}});
    const auto fit = glm_fit_logistic(design, y);
    CHECK(fit.converged);
    CHECK(std::abs(fit.coefficients[1] - std::log(double(a) * d / (double(b) * c))) < 1e-6);
    CHECK(std::abs(fit.coefficients[0] - std::log(double(c) / d)) < 1e-6);
    // Woolf standard error of the log odds ratio
    CHECK(fit.se[1] == doctest::Approx(std::sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d)).epsilon(1e-6));
    CHECK(fit.ci_low[1] < fit.odds_ratios[1]);
    CHECK(fit.odds_ratios[1] < fit.ci_high[1]);
  }
}

TEST_CASE("logistic glm intercept, oracle deviance and failure modes") {
  const std::vector<double> y{1, 0, 0, 1, 1, 1, 0, 1, 1, 0};
  const auto one = DesignMatrix::from_columns({{"(intercept)", std::vector<double>(y.size(), 1.0)}});
  CHECK(glm_fit_logistic(one, y).coefficients[0] == doctest::Approx(std::log(0.6 / 0.4)).epsilon(1e-10));

  // Two predictors: grid-search the deviance and zoom in.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::vector<double> x1, x2, yy;
  for (int i = 0; i < 40; ++i) {
    x1.push_back(z(rng));
    x2.push_back(z(rng));
    const double eta = 0.3 + 0.8 * x1.back() - 0.5 * x2.back();
    yy.push_back(std::uniform_real_distribution<double>(0, 1)(rng) < 1 / (1 + std::exp(-eta)) ? 1.0 : 0.0);
  }
  const auto design = DesignMatrix::from_columns(
      {{"(intercept)", std::vector<double>(40, 1.0)}, {"x1", x1}, {"x2", x2}});
  const auto fit = glm_fit_logistic(design, yy);
  std::vector<double> centre{0, 0, 0};
  double width = 4.0;
  double best = 1e300;
  for (int round = 0; round < 12; ++round) {
    std::vector<double> arg = centre;
    for (int i = -5; i <= 5; ++i) {
      for (int j = -5; j <= 5; ++j) {
        for (int k = -5; k <= 5; ++k) {
          const std::vector<double> b{centre[0] + i * width / 5, centre[1] + j * width / 5,
                                      centre[2] + k * width / 5};
          const double dev = logistic_deviance(design, yy, b);
          if (dev < best) {
            best = dev;
            arg = b;
          }
        }
      }
    }
    centre = arg;
    width /= 4.0;
  }
  CHECK(std::abs(fit.deviance - best) < 1e-6);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(fit.coefficients[j] - centre[j]) < 1e-3);

  // Complete separation.
  const std::vector<double> sy{0, 0, 0, 1, 1, 1};
  const std::vector<double> sx{1, 2, 3, 4, 5, 6};
  const auto sep = DesignMatrix::from_columns({{"(intercept)", std::vector<double>(6, 1.0)}, {"x", sx}});
  CHECK_THROWS_AS(glm_fit_logistic(sep, sy), Separation);
  // Rank deficiency.
  const auto dup = DesignMatrix::from_columns(
      {{"(intercept)", std::vector<double>(6, 1.0)}, {"x", sx}, {"x2", sx}});
  CHECK_THROWS_AS(glm_fit_logistic(dup, std::vector<double>{0, 1, 0, 1, 1, 0}), RankDeficient);
  CHECK_THROWS_AS(glm_fit_logistic(one, std::vector<double>{1, 0}), std::invalid_argument);
}

TEST_CASE("analysis of deviance") {
  // 8 rows, one binary predictor: groups x=0 (1 of 4) and x=1 (3 of 4).
  const std::vector<double> y{1, 0, 0, 0, 1, 1, 1, 0};
  const std::vector<double> x{0, 0, 0, 0, 1, 1, 1, 1};
  const auto table = anova_deviance({{"x", {{"x", x}}}}, y);
  const double ll0 = log_likelihood_groups({{4, 8}});
  const double ll1 = log_likelihood_groups({{1, 4}, {3, 4}});
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0].delta == doctest::Approx(2 * (ll1 - ll0)).epsilon(1e-9));
  CHECK(table.null_deviance == doctest::Approx(-2 * ll0).epsilon(1e-9));
  CHECK(table.rows[0].df == 1);
  CHECK(table.rows[0].residual_df == 6);
  CHECK(table.rows[0].p > 0.0);

  CHECK_THROWS_AS(anova_deviance({{"x", {{"x", x}}}, {"again", {{"x copy", x}}}}, y), RankDeficient);

  // Null term: delta D is chi-squared with its df, mean about df.
  std::mt19937_64 rng(12);
  std::bernoulli_distribution coin(0.4);
  std::uniform_int_distribution<int> lvl(0, 2);
  double mean = 0.0;
  const int sims = 300;
  for (int s = 0; s < sims; ++s) {
    std::vector<double> yy;
    std::vector<std::string> g;
    for (int i = 0; i < 150; ++i) {
      yy.push_back(coin(rng) ? 1.0 : 0.0);
      g.push_back("g" + std::to_string(lvl(rng)));
    }
    const auto t = anova_deviance({{"g", dummy_columns("g", g, "g0")}}, yy);
    CHECK(t.rows[0].df == 2);
    mean += t.rows[0].delta;
  }
  CHECK(std::abs(mean / sims - 2.0) < 0.35);
}

TEST_CASE("ratings ingestion and design") {
  const std::string text =
      "rater_id\tstudy_id\tpreference\treasons\tfindings\n"
      "A\ts1\tradiologist\trecall\tpneumonia,atelectasis\n"
      "B\ts1\tnone\t-\tpneumonia,atelectasis\n"
      "A\ts2\tgenerated\tprecision,readability\t-\n"
      "B\ts2\tradiologist\trecall\t-\n";
  std::istringstream in(text);
  const auto recs = parse_ratings(in);
  REQUIRE(recs.size() == 4);
  CHECK_FALSE(recs[0].acceptable());
  CHECK(recs[1].acceptable());
  CHECK(recs[1].reasons.empty());
  std::ostringstream out;
  write_ratings(out, recs);
  CHECK(out.str() == text);

  const auto d = ratings_design(recs);
  // rows: 1x2 + 3x2 + 2x1 + 1x1
  CHECK(d.y.size() == 11);
  CHECK(d.terms.size() == 6);
  CHECK(d.terms[0].columns.size() == 2);  // precision, recall
  CHECK(d.terms[0].columns[0].name == "reason[precision]");
  CHECK(d.terms[1].columns[0].name == "rater[B]");

  const auto m = preference_matrix(recs);
  CHECK(m.raters == std::vector<std::string>{"A", "B"});
  CHECK(m.ratings == std::vector<std::vector<int>>{{0, 2}, {1, 0}});

  std::istringstream bad("rater_id\tstudy_id\tpreference\treasons\tfindings\nA\ts1\tnone\trecall\t-\n");
  CHECK_THROWS_AS(parse_ratings(bad), std::invalid_argument);

  const auto sim = simulate_ratings(120, {"A", "B", "C"},
                                    {"atelectasis", "cardiomegaly", "no-finding", "pneumonia"}, 0.45, 9);
  CHECK(sim.size() == 360);
  const auto sd = ratings_design(sim);
  const auto table = anova_deviance(sd.terms, sd.y);
  CHECK(table.rows.size() == 6);
  for (const auto& r : table.rows) {
    CHECK(r.delta >= 0.0);
    CHECK(r.p >= 0.0);
  }
  const auto fit = glm_fit_logistic(main_design(sd), sd.y);
  CHECK(fit.converged);
}
