#include "rrg/stats/binomial.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>

namespace rrg::stats {

namespace {

using Binomial = boost::math::binomial_distribution<double>;

void check_probability(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument(std::string(what) + " must lie strictly between 0 and 1");
  }
}

// P(X >= k)
double upper_tail(const Binomial& d, std::uint64_t k) {
  if (k == 0) return 1.0;
  return boost::math::cdf(boost::math::complement(d, static_cast<double>(k - 1)));
}

// P(X <= k)
double lower_tail(const Binomial& d, std::uint64_t k) {
  return boost::math::cdf(d, static_cast<double>(k));
}

constexpr double kRelErr = 1.0 + 1e-7;

}  // namespace

std::string_view to_string(Alternative a) {
  switch (a) {
    case Alternative::two_sided: return "two-sided";
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
  }
  return "?";
}

Alternative alternative_from_string(std::string_view s) {
  if (s == "two-sided") return Alternative::two_sided;
  if (s == "greater") return Alternative::greater;
  if (s == "less") return Alternative::less;
  throw std::invalid_argument("unknown alternative '" + std::string(s) +
                              "' (expected two-sided, greater or less)");
}

double exact_binomial_test(std::uint64_t k, std::uint64_t n, double p0, Alternative alternative) {
  if (k > n) {
    throw std::invalid_argument("binomial test: k=" + std::to_string(k) + " exceeds n=" +
                                std::to_string(n));
  }
  check_probability(p0, "p0");
  const Binomial d(static_cast<double>(n), p0);
  switch (alternative) {
    case Alternative::greater: return upper_tail(d, k);
    case Alternative::less: return lower_tail(d, k);
    case Alternative::two_sided: break;
  }
  const double dk = boost::math::pdf(d, static_cast<double>(k));
  double p = 0.0;
  for (std::uint64_t i = 0; i <= n; ++i) {
    const double di = boost::math::pdf(d, static_cast<double>(i));
    if (di <= dk * kRelErr) p += di;
  }
  return std::min(1.0, p);
}

double binomial_power(std::uint64_t n, double p0, double p1, double alpha,
                      Alternative alternative) {
  if (n == 0) throw std::invalid_argument("binomial power: n must be at least 1");
  check_probability(p0, "p0");
  check_probability(p1, "p1");
  check_probability(alpha, "alpha");
  const Binomial null(static_cast<double>(n), p0);
  const Binomial alt(static_cast<double>(n), p1);
  const auto no_region = [&] {
    return std::domain_error("binomial power: no outcome out of " + std::to_string(n) +
                             " is significant at alpha=" + std::to_string(alpha));
  };
  switch (alternative) {
    case Alternative::greater: {
      // smallest k with P(X >= k | p0) <= alpha
      std::uint64_t k = 0;
      while (k <= n && upper_tail(null, k) > alpha) ++k;
      if (k > n) throw no_region();
      return upper_tail(alt, k);
    }
    case Alternative::less: {
      // largest k with P(X <= k | p0) <= alpha
      if (lower_tail(null, 0) > alpha) throw no_region();
      std::uint64_t k = 0;
      while (k < n && lower_tail(null, k + 1) <= alpha) ++k;
      return lower_tail(alt, k);
    }
    case Alternative::two_sided: break;
  }
  double power = 0.0;
  bool any = false;
  for (std::uint64_t k = 0; k <= n; ++k) {
    if (exact_binomial_test(k, n, p0, Alternative::two_sided) <= alpha) {
      power += boost::math::pdf(alt, static_cast<double>(k));
      any = true;
    }
  }
  if (!any) throw no_region();
  return power;
}

}  // namespace rrg::stats
