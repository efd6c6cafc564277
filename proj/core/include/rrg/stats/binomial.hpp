#pragma once

#include <cstdint>
#include <string_view>

namespace rrg::stats {

enum class Alternative { two_sided, greater, less };

std::string_view to_string(Alternative a);
/// Accepts "two-sided", "greater" and "less"; throws std::invalid_argument otherwise.
Alternative alternative_from_string(std::string_view s);

/// Exact binomial test of k successes in n trials against p0. The two-sided
/// p-value sums every outcome whose probability does not exceed that of k
/// (with a 1e-7 relative allowance for rounding).
/// Throws std::invalid_argument unless 0 <= k <= n and 0 < p0 < 1.
double exact_binomial_test(std::uint64_t k, std::uint64_t n, double p0,
                           Alternative alternative = Alternative::two_sided);

/// Power of the exact level-alpha test of p0 when the true proportion is p1.
/// Throws std::domain_error when no outcome reaches significance.
double binomial_power(std::uint64_t n, double p0, double p1, double alpha,
                      Alternative alternative = Alternative::greater);

}  // namespace rrg::stats
