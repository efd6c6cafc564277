#include "rrg/stats/glm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "rrg/numkit/ops.hpp"

namespace rrg::stats {

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

constexpr double kTolerance = 1e-8;
constexpr std::size_t kMaxIterations = 100;
constexpr double kSeparationBound = 15.0;

Matrix to_eigen(const numkit::Array& a) {
  Matrix m(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a.at(r, c);
  }
  return m;
}

double sigmoid(double t) {
  return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

// Each observation's deviance contribution, stable for fitted values near 0 or 1.
double deviance_of(const Vector& eta, std::span<const double> y) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double t = eta(i);
    // log(1 + e^t) without overflow
    const double softplus = t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
    d += 2.0 * (softplus - y[static_cast<std::size_t>(i)] * t);
  }
  return d;
}

void check_inputs(const DesignMatrix& design, std::span<const double> y) {
  if (design.x.rank() != 2 || design.x.rows() != y.size()) {
    throw std::invalid_argument("glm: design has " + std::to_string(design.x.rows()) +
                                " rows but there are " + std::to_string(y.size()) + " outcomes");
  }
  if (design.names.size() != design.x.cols()) {
    throw std::invalid_argument("glm: column names do not match the design width");
  }
  for (double v : y) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("glm: outcomes must be 0 or 1");
  }
}

Eigen::Index column_rank(const Matrix& x) {
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  return qr.rank();
}

}  // namespace

DesignMatrix DesignMatrix::from_columns(const std::vector<DesignColumn>& columns) {
  DesignMatrix d;
  const std::size_t n = columns.empty() ? 0 : columns.front().values.size();
  d.x = numkit::Array(numkit::Shape{n, columns.size()}, 0.0);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].values.size() != n) {
      throw std::invalid_argument("design: column '" + columns[c].name + "' has the wrong length");
    }
    d.names.push_back(columns[c].name);
    for (std::size_t r = 0; r < n; ++r) d.x.at(r, c) = columns[c].values[r];
  }
  return d;
}

double logistic_deviance(const DesignMatrix& design, std::span<const double> y,
                         std::span<const double> beta) {
  check_inputs(design, y);
  const Matrix x = to_eigen(design.x);
  const Vector b = Eigen::Map<const Vector>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  return deviance_of(x * b, y);
}

GlmFit glm_fit_logistic(const DesignMatrix& design, std::span<const double> y) {
  check_inputs(design, y);
  const Matrix x = to_eigen(design.x);
  const auto p = x.cols();
  if (p == 0) throw std::invalid_argument("glm: empty design");
  if (column_rank(x) < p) {
    throw RankDeficient("glm: design matrix is rank deficient (rank " +
                        std::to_string(column_rank(x)) + " < " + std::to_string(p) + " columns)");
  }
  const Vector yv = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  Vector b = Vector::Zero(p);
  GlmFit fit;
  Matrix xtwx;
  for (fit.iterations = 1; fit.iterations <= kMaxIterations; ++fit.iterations) {
    const Vector eta = x * b;
    Vector w(eta.size());
    Vector z(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double mu = sigmoid(eta(i));
      w(i) = std::max(mu * (1.0 - mu), 1e-300);
      z(i) = eta(i) + (yv(i) - mu) / w(i);
    }
    xtwx = x.transpose() * w.asDiagonal() * x;
    const Vector next = xtwx.ldlt().solve(x.transpose() * (w.asDiagonal() * z));
    if (!next.allFinite()) throw Separation("glm: the fit diverged (complete or quasi-complete separation)");
    const double change = (next - b).cwiseAbs().maxCoeff();
    b = next;
    if (change < kTolerance) {
      fit.converged = true;
      break;
    }
  }
  fit.iterations = std::min(fit.iterations, kMaxIterations);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::abs(b(j)) > kSeparationBound) {
      throw Separation("glm: coefficient '" + design.names[static_cast<std::size_t>(j)] +
                       "' reached " + std::to_string(b(j)) + ", the outcome is separated");
    }
  }
  // refresh the information matrix at the final estimate
  {
    const Vector eta = x * b;
    Vector w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double mu = sigmoid(eta(i));
      w(i) = mu * (1.0 - mu);
    }
    xtwx = x.transpose() * w.asDiagonal() * x;
    fit.deviance = deviance_of(eta, y);
  }
  const Matrix cov = xtwx.inverse();
  fit.names = design.names;
  fit.covariance = numkit::Array(numkit::Shape{static_cast<std::size_t>(p), static_cast<std::size_t>(p)}, 0.0);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = 0; k < p; ++k) {
      fit.covariance.at(static_cast<std::size_t>(j), static_cast<std::size_t>(k)) = cov(j, k);
    }
    const double coef = b(j);
    const double se = std::sqrt(cov(j, j));
    fit.coefficients.push_back(coef);
    fit.se.push_back(se);
    fit.z.push_back(coef / se);
    fit.p.push_back(2.0 * (1.0 - numkit::normal_cdf(std::abs(coef / se))));
    fit.odds_ratios.push_back(std::exp(coef));
    fit.ci_low.push_back(std::exp(coef - 1.96 * se));
    fit.ci_high.push_back(std::exp(coef + 1.96 * se));
  }
  return fit;
}

DevianceTable anova_deviance(const std::vector<TermGroup>& terms, std::span<const double> y) {
  std::vector<DesignColumn> cols{{"(intercept)", std::vector<double>(y.size(), 1.0)}};
  DevianceTable table;
  const auto n = y.size();
  GlmFit current = glm_fit_logistic(DesignMatrix::from_columns(cols), y);
  table.null_df = n - 1;
  table.null_deviance = current.deviance;
  std::size_t width = 1;
  for (const auto& term : terms) {
    // keep only columns that add a direction; aliased ones (e.g. empty
    // interaction cells) are dropped
    std::size_t added = 0;
    for (const auto& c : term.columns) {
      cols.push_back(c);
      const Matrix x = to_eigen(DesignMatrix::from_columns(cols).x);
      if (static_cast<std::size_t>(column_rank(x)) == cols.size()) {
        ++added;
      } else {
        cols.pop_back();
      }
    }
    if (added == 0) {
      throw RankDeficient("anova: term '" + term.name +
                          "' adds no column outside the span of earlier terms");
    }
    const DesignMatrix design = DesignMatrix::from_columns(cols);
    const std::size_t rank = cols.size();
    const GlmFit next = glm_fit_logistic(design, y);
    if (next.deviance > current.deviance + 1e-8) {
      throw std::runtime_error("anova: deviance rose when adding '" + term.name +
                               "'; the model sequence is not nested");
    }
    DevianceRow row;
    row.term = term.name;
    row.df = rank - width;
    row.delta = std::max(0.0, current.deviance - next.deviance);
    row.residual_df = n - rank;
    row.residual_deviance = next.deviance;
    const boost::math::chi_squared chi(static_cast<double>(row.df));
    row.p = boost::math::cdf(boost::math::complement(chi, row.delta));
    table.rows.push_back(row);
    width = rank;
    current = next;
  }
  return table;
}

std::vector<DesignColumn> dummy_columns(const std::string& name,
                                        const std::vector<std::string>& values,
                                        const std::string& reference) {
  const std::set<std::string> levels(values.begin(), values.end());
  std::vector<DesignColumn> out;
  for (const auto& level : levels) {
    if (level == reference) continue;
    DesignColumn c{name + "[" + level + "]", {}};
    c.values.reserve(values.size());
    for (const auto& v : values) c.values.push_back(v == level ? 1.0 : 0.0);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<DesignColumn> interaction_columns(const std::vector<DesignColumn>& a,
                                              const std::vector<DesignColumn>& b) {
  std::vector<DesignColumn> out;
  for (const auto& ca : a) {
    for (const auto& cb : b) {
      DesignColumn c{ca.name + ":" + cb.name, {}};
      c.values.resize(ca.values.size());
      for (std::size_t i = 0; i < ca.values.size(); ++i) c.values[i] = ca.values[i] * cb.values[i];
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace rrg::stats
