#pragma once

#include <functional>
#include <map>
#include <string>

#include "rrg/numkit/parameter.hpp"

namespace rrg::train {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay. Frozen parameters are never touched;
/// `trainable` can restrict updates further (e.g. decoder only).
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  void step(numkit::ParameterSet& params, double lr,
            const std::function<bool(const std::string&)>& trainable = {});

  std::size_t steps() const { return steps_; }
  const AdamWConfig& config() const { return config_; }

 private:
  struct Moments {
    numkit::Array m;
    numkit::Array v;
  };
  AdamWConfig config_;
  std::size_t steps_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace rrg::train
