#include "rrg/rewards/significance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace rrg::rewards {

namespace {

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

constexpr double kQuadTolerance = 1e-10;

/// P(range of k standard normals <= w).
double normal_range_cdf(double w, double k) {
  if (w <= 0.0) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  auto integrand = [w, k](double z) {
    const double inner = boost::math::erfc(-z / std::sqrt(2.0)) / 2.0 -
                         boost::math::erfc(-(z - w) / std::sqrt(2.0)) / 2.0;
    if (inner <= 0.0) return 0.0;
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi) * std::pow(inner, k - 1.0);
  };
  // the integrand is negligible outside [-9, w + 9]
  const double v = gauss_kronrod<double, 61>::integrate(integrand, -9.0, w + 9.0, 15, kQuadTolerance);
  return std::min(1.0, k * v);
}

}  // namespace

double studentized_range_cdf(double q, double k, double df) {
  if (!(k >= 2.0) || !(df > 0.0)) {
    throw std::invalid_argument("studentized_range_cdf: need k >= 2 and df > 0");
  }
  if (q <= 0.0) return 0.0;
  if (std::isinf(df)) return normal_range_cdf(q, k);
  using boost::math::quadrature::gauss_kronrod;
  // density of s = sqrt(chi2_df / df), in log form for large df
  const double log_c = 0.5 * df * std::log(df) - boost::math::lgamma(0.5 * df) -
                       (0.5 * df - 1.0) * std::log(2.0);
  auto density = [df, log_c](double s) {
    if (s <= 0.0) return 0.0;
    return std::exp(log_c + (df - 1.0) * std::log(s) - 0.5 * df * s * s);
  };
  auto integrand = [&](double s) {
    const double f = density(s);
    return f == 0.0 ? 0.0 : f * normal_range_cdf(q * s, k);
  };
  // s concentrates around 1 with spread about 1/sqrt(2 df)
  const double spread = 1.0 / std::sqrt(2.0 * df);
  const double lo = std::max(0.0, 1.0 - 14.0 * spread);
  const double hi = df >= 20.0 ? 1.0 + 14.0 * spread : std::numeric_limits<double>::infinity();
  double total = gauss_kronrod<double, 61>::integrate(integrand, lo, hi, 15, kQuadTolerance);
  if (lo > 0.0) total += gauss_kronrod<double, 61>::integrate(integrand, 0.0, lo, 15, kQuadTolerance);
  return std::clamp(total, 0.0, 1.0);
}

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw std::invalid_argument("one_way_anova: need at least two groups");
  std::size_t n = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("one_way_anova: empty group");
    n += g.size();
    grand += std::accumulate(g.begin(), g.end(), 0.0);
  }
  if (n <= groups.size()) throw std::invalid_argument("one_way_anova: no within-group degrees of freedom");
  grand /= static_cast<double>(n);
  AnovaResult r;
  for (const auto& g : groups) {
    const double m = mean_of(g);
    r.ss_between += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double x : g) r.ss_within += (x - m) * (x - m);
  }
  r.df_between = static_cast<double>(groups.size() - 1);
  r.df_within = static_cast<double>(n - groups.size());
  const double msb = r.ss_between / r.df_between;
  const double msw = r.ss_within / r.df_within;
  if (r.ss_between == 0.0) {
    r.f = 0.0;
    r.p = 1.0;
  } else if (msw == 0.0) {
    r.f = std::numeric_limits<double>::infinity();
    r.p = 0.0;
  } else {
    r.f = msb / msw;
    r.p = boost::math::cdf(boost::math::complement(
        boost::math::fisher_f_distribution<double>(r.df_between, r.df_within), r.f));
  }
  return r;
}

std::vector<TukeyComparison> tukey_hsd(const std::vector<std::vector<double>>& groups) {
  const AnovaResult a = one_way_anova(groups);
  const double msw = a.ss_within / a.df_within;
  const double k = static_cast<double>(groups.size());
  std::vector<TukeyComparison> out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      TukeyComparison c;
      c.a = i;
      c.b = j;
      c.mean_diff = mean_of(groups[i]) - mean_of(groups[j]);
      const double se = std::sqrt(msw / 2.0 *
                                  (1.0 / static_cast<double>(groups[i].size()) +
                                   1.0 / static_cast<double>(groups[j].size())));
      if (se == 0.0) {
        c.q = c.mean_diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        c.p = c.mean_diff == 0.0 ? 1.0 : 0.0;
      } else {
        c.q = std::abs(c.mean_diff) / se;
        c.p = std::clamp(1.0 - studentized_range_cdf(c.q, k, a.df_within), 0.0, 1.0);
      }
      out.push_back(c);
    }
  }
  return out;
}

SignificanceTable paired_significance(const std::map<std::string, std::vector<double>>& scores,
                                      double alpha) {
  if (scores.size() < 2) throw std::invalid_argument("paired_significance: need at least two models");
  SignificanceTable t;
  std::vector<std::vector<double>> groups;
  std::size_t studies = 0;
  for (const auto& [model, values] : scores) {
    if (t.models.empty()) studies = values.size();
    if (values.size() != studies) {
      throw std::invalid_argument("paired_significance: model " + model +
                                  " was scored on a different number of studies");
    }
    t.models.push_back(model);
    groups.push_back(values);
  }
  if (studies < 2) throw std::invalid_argument("paired_significance: need at least two studies");
  t.anova = one_way_anova(groups);
  if (t.anova.p <= alpha) {
    t.post_hoc = true;
    t.pairs = tukey_hsd(groups);
  }
  return t;
}

}  // namespace rrg::rewards
