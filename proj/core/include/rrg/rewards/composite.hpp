#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rrg::rewards {

struct ReportText {
  std::string findings;
  std::string impression;

  std::string combined() const;  // findings followed by impression
};

/// Component score in [0, 1] of a generated report against its reference.
using ComponentFn = std::function<double(const ReportText& generated, const ReportText& reference)>;

/// Known components: "bleu4", "rougeL", "section_f1", "arn". Further ones can
/// be registered at start-up.
void register_component(const std::string& name, ComponentFn fn);
bool has_component(const std::string& name);

struct RewardComponent {
  std::string name;
  double weight = 0.0;
};

struct RewardSpec {
  std::vector<RewardComponent> components;

  /// bleu4 0.3, rougeL 0.3, section_f1 0.3, arn 0.1.
  static RewardSpec defaults();
  /// Throws on negative weights, duplicate or unregistered names.
  void validate() const;
  std::vector<double> weights() const;
  std::vector<std::string> names() const;
};

/// Unweighted component vector in spec order; all zeros for an invalid
/// (absent) generation.
std::vector<double> composite_reward(const std::optional<ReportText>& generated,
                                     const ReportText& reference, const RewardSpec& spec);

/// Weighted sum of a component vector.
double weighted_reward(const std::vector<double>& components, const RewardSpec& spec);

}  // namespace rrg::rewards
