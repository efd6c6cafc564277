#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rrg/numkit/parameter.hpp"

namespace rrg::numkit {

struct GradCheckFailure {
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  std::vector<GradCheckFailure> failures;
  double max_error = 0.0;

  bool passed() const { return failures.empty(); }
  double pass_fraction() const {
    return checked == 0 ? 1.0
                        : 1.0 - static_cast<double>(failures.size()) / static_cast<double>(checked);
  }
};

struct GradCheckOptions {
  bool include_frozen = false;
  /// 0 checks every element; otherwise a seeded subset per parameter.
  std::size_t max_elements_per_parameter = 0;
  std::uint64_t seed = 0;
  /// Error denominator is max(scale_floor, |numeric|); smaller floors make
  /// the check relative for small gradients too.
  double scale_floor = 1.0;
};

/// Scalar function of a parameter set; it must only read parameters through
/// the set it is given.
using ScalarFunction = std::function<Tensor(const ParameterSet&)>;

/// Compares reverse-mode gradients against central differences. An element
/// fails when |analytic - numeric| / max(scale_floor, |numeric|) > tolerance.
GradCheckReport grad_check(const ScalarFunction& f, ParameterSet& point, double step,
                           double tolerance, const GradCheckOptions& options = {});

}  // namespace rrg::numkit
