#include "rrg/train/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rrg::train {

double lr_schedule(std::size_t step, std::size_t total_steps, std::size_t warmup, double peak,
                   std::size_t cycles) {
  if (warmup >= total_steps) {
    throw std::invalid_argument("lr_schedule: warm-up (" + std::to_string(warmup) +
                                ") must be shorter than the run (" + std::to_string(total_steps) +
                                " steps)");
  }
  if (cycles == 0) throw std::invalid_argument("lr_schedule: cycles must be at least 1");
  if (step > total_steps) throw std::invalid_argument("lr_schedule: step past the end of the run");
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  const double span = static_cast<double>(total_steps - warmup);
  const double progress = static_cast<double>(step - warmup) / span;  // [0, 1]
  if (progress >= 1.0) return 0.0;
  const double scaled = progress * static_cast<double>(cycles);
  const double frac = scaled - std::floor(scaled);
  return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

double constant_schedule(std::size_t step, std::size_t warmup, double peak) {
  if (step < warmup) return peak * static_cast<double>(step) / static_cast<double>(warmup);
  return peak;
}

}  // namespace rrg::train
