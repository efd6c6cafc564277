#include "rrg/train/optimizer.hpp"

#include <cmath>

namespace rrg::train {

void AdamW::step(numkit::ParameterSet& params, double lr,
                 const std::function<bool(const std::string&)>& trainable) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (auto& p : params.items()) {
    if (p.frozen || (trainable && !trainable(p.name))) continue;
    numkit::Array& w = p.tensor.mutable_value();
    const numkit::Array g = p.tensor.grad();
    numkit::require_finite(g, "AdamW gradient");
    auto [it, fresh] = state_.try_emplace(p.name);
    if (fresh) {
      it->second.m = numkit::Array(w.shape(), 0.0);
      it->second.v = numkit::Array(w.shape(), 0.0);
    }
    auto& m = it->second.m;
    auto& v = it->second.v;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
      w[i] -= lr * (update + config_.weight_decay * w[i]);
    }
  }
}

}  // namespace rrg::train
