#include "rrg/numkit/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace rrg::numkit {

GradCheckReport grad_check(const ScalarFunction& f, ParameterSet& point, double step,
                           double tolerance, const GradCheckOptions& options) {
  if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be positive");
  if (!(options.scale_floor > 0.0)) {
    throw std::invalid_argument("grad_check: scale floor must be positive");
  }

  point.zero_grad();
  Tensor loss = f(point);
  backward(loss);

  ParameterSet probe = point.detached();
  std::mt19937_64 rng(options.seed);
  GradCheckReport report;

  auto eval = [&](const std::string& where) {
    const double v = f(probe).item();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite value at " + where);
    return v;
  };

  for (std::size_t pi = 0; pi < point.items().size(); ++pi) {
    const Parameter& p = point.items()[pi];
    if (p.frozen && !options.include_frozen) continue;
    const Array analytic = p.tensor.grad();
    Array& values = probe.items()[pi].tensor.mutable_value();

    std::vector<std::size_t> indices(values.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (options.max_elements_per_parameter != 0 &&
        indices.size() > options.max_elements_per_parameter) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(options.max_elements_per_parameter);
      std::sort(indices.begin(), indices.end());
    }

    for (std::size_t i : indices) {
      const double original = values[i];
      values[i] = original + step;
      const double up = eval(p.name);
      values[i] = original - step;
      const double down = eval(p.name);
      values[i] = original;

      const double numeric = (up - down) / (2.0 * step);
      const double err = std::abs(analytic[i] - numeric) / std::max(options.scale_floor, std::abs(numeric));
      ++report.checked;
      report.max_error = std::max(report.max_error, err);
      if (!(err <= tolerance)) {
        report.failures.push_back({p.name, i, analytic[i], numeric, err});
      }
    }
  }
  return report;
}

}  // namespace rrg::numkit
