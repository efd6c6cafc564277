#include "rrg/stats/kappa.hpp"

#include <cmath>
#include <string>

#include "rrg/numkit/ops.hpp"

namespace rrg::stats {

KappaResult fleiss_kappa_counts(const std::vector<std::vector<std::size_t>>& counts) {
  if (counts.empty()) throw std::invalid_argument("fleiss kappa: no items");
  const std::size_t k = counts.front().size();
  std::size_t m = 0;
  for (std::size_t c : counts.front()) m += c;
  if (m < 2) throw std::invalid_argument("fleiss kappa: each item needs at least two ratings");
  const auto n = static_cast<double>(counts.size());
  const auto md = static_cast<double>(m);

  std::vector<double> p(k, 0.0);
  double p_bar = 0.0;
  for (const auto& row : counts) {
    if (row.size() != k) throw std::invalid_argument("fleiss kappa: ragged count table");
    std::size_t total = 0;
    double pairs = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      total += row[j];
      p[j] += static_cast<double>(row[j]);
      pairs += static_cast<double>(row[j]) * (static_cast<double>(row[j]) - 1.0);
    }
    if (total != m) {
      throw std::invalid_argument("fleiss kappa: items have different numbers of ratings (" +
                                  std::to_string(total) + " vs " + std::to_string(m) + ")");
    }
    p_bar += pairs / (md * (md - 1.0));
  }
  p_bar /= n;
  double p_e = 0.0;
  double pq = 0.0;
  double pq_qp = 0.0;
  for (double& pj : p) {
    pj /= n * md;
    p_e += pj * pj;
    pq += pj * (1.0 - pj);
    pq_qp += pj * (1.0 - pj) * ((1.0 - pj) - pj);
  }
  if (1.0 - p_e <= 0.0) {
    throw UndefinedKappa("fleiss kappa: every rating uses one category, chance agreement is 1");
  }
  KappaResult r;
  r.agreement = p_bar;
  r.kappa = (p_bar - p_e) / (1.0 - p_e);
  const double var_term = pq * pq - pq_qp;
  r.se = std::sqrt(2.0) / (pq * std::sqrt(n * md * (md - 1.0))) * std::sqrt(std::max(0.0, var_term));
  if (r.se > 0.0) {
    r.z = r.kappa / r.se;
    r.p = 2.0 * (1.0 - numkit::normal_cdf(std::abs(r.z)));
  }
  return r;
}

KappaResult fleiss_kappa(const std::vector<std::vector<int>>& ratings, std::size_t categories,
                         const std::vector<std::size_t>& raters) {
  std::vector<std::vector<std::size_t>> counts;
  for (const auto& item : ratings) {
    std::vector<std::size_t> row(categories, 0);
    auto add = [&](std::size_t r) {
      if (r >= item.size()) throw std::out_of_range("fleiss kappa: rater index out of range");
      const int c = item[r];
      if (c < 0 || static_cast<std::size_t>(c) >= categories) {
        throw std::out_of_range("fleiss kappa: category " + std::to_string(c) + " out of range");
      }
      ++row[static_cast<std::size_t>(c)];
    };
    if (raters.empty()) {
      for (std::size_t r = 0; r < item.size(); ++r) add(r);
    } else {
      for (std::size_t r : raters) add(r);
    }
    counts.push_back(std::move(row));
  }
  return fleiss_kappa_counts(counts);
}

double cohen_kappa(const std::vector<int>& a, const std::vector<int>& b, std::size_t categories) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("cohen kappa: raters must score the same non-empty item list");
  }
  std::vector<double> pa(categories, 0.0), pb(categories, 0.0);
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < 0 || b[i] < 0 || static_cast<std::size_t>(a[i]) >= categories ||
        static_cast<std::size_t>(b[i]) >= categories) {
      throw std::out_of_range("cohen kappa: category out of range");
    }
    pa[static_cast<std::size_t>(a[i])] += 1.0;
    pb[static_cast<std::size_t>(b[i])] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  const auto n = static_cast<double>(a.size());
  double pe = 0.0;
  for (std::size_t j = 0; j < categories; ++j) pe += (pa[j] / n) * (pb[j] / n);
  if (1.0 - pe <= 0.0) throw UndefinedKappa("cohen kappa: chance agreement is 1");
  return (agree / n - pe) / (1.0 - pe);
}

std::vector<PairwiseKappa> pairwise_kappa(const std::vector<std::vector<int>>& ratings,
                                          std::size_t categories) {
  const std::size_t raters = ratings.empty() ? 0 : ratings.front().size();
  std::vector<PairwiseKappa> out;
  for (std::size_t a = 0; a < raters; ++a) {
    for (std::size_t b = a + 1; b < raters; ++b) {
      out.push_back({a, b, fleiss_kappa(ratings, categories, {a, b})});
    }
  }
  return out;
}

}  // namespace rrg::stats
