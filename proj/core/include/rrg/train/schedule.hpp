#pragma once

#include <cstddef>

namespace rrg::train {

/// Linear warm-up from 0 to `peak`, then `cycles` equal cosine segments, each
/// decaying from `peak` to 0 and restarting at the next boundary.
/// Throws std::invalid_argument when warmup >= total_steps, cycles == 0 or
/// step > total_steps.
double lr_schedule(std::size_t step, std::size_t total_steps, std::size_t warmup, double peak,
                   std::size_t cycles);

/// Linear warm-up to `peak`, constant afterwards.
double constant_schedule(std::size_t step, std::size_t warmup, double peak);

}  // namespace rrg::train
