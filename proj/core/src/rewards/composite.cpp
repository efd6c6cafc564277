#include "rrg/rewards/composite.hpp"

#include <map>
#include <set>
#include <stdexcept>

#include "rrg/rewards/metrics.hpp"

namespace rrg::rewards {

std::string ReportText::combined() const {
  if (findings.empty()) return impression;
  if (impression.empty()) return findings;
  return findings + " " + impression;
}

namespace {

std::map<std::string, ComponentFn>& registry() {
  static std::map<std::string, ComponentFn> r{
      {"bleu4", [](const ReportText& g, const ReportText& r) { return bleu4(g.combined(), r.combined()); }},
      {"rougeL", [](const ReportText& g, const ReportText& r) { return rouge_l(g.combined(), r.combined()); }},
      {"section_f1",
       [](const ReportText& g, const ReportText& r) {
         return 0.5 * (rouge_l(g.findings, r.findings) + rouge_l(g.impression, r.impression));
       }},
      {"arn", [](const ReportText& g, const ReportText&) { return arn(g.combined()); }},
  };
  return r;
}

}  // namespace

void register_component(const std::string& name, ComponentFn fn) {
  if (!fn) throw std::invalid_argument("register_component: empty function for " + name);
  registry()[name] = std::move(fn);
}

bool has_component(const std::string& name) { return registry().contains(name); }

RewardSpec RewardSpec::defaults() {
  return {{{"bleu4", 0.3}, {"rougeL", 0.3}, {"section_f1", 0.3}, {"arn", 0.1}}};
}

void RewardSpec::validate() const {
  std::set<std::string> seen;
  for (const auto& c : components) {
    if (!(c.weight >= 0.0)) throw std::invalid_argument("reward weight of " + c.name + " is negative");
    if (!seen.insert(c.name).second) throw std::invalid_argument("reward component " + c.name + " repeated");
    if (!has_component(c.name)) throw std::invalid_argument("unknown reward component " + c.name);
  }
}

std::vector<double> RewardSpec::weights() const {
  std::vector<double> w;
  for (const auto& c : components) w.push_back(c.weight);
  return w;
}

std::vector<std::string> RewardSpec::names() const {
  std::vector<std::string> n;
  for (const auto& c : components) n.push_back(c.name);
  return n;
}

std::vector<double> composite_reward(const std::optional<ReportText>& generated,
                                     const ReportText& reference, const RewardSpec& spec) {
  spec.validate();
  std::vector<double> out(spec.components.size(), 0.0);
  if (!generated) return out;
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = registry().at(spec.components[k].name)(*generated, reference);
  }
  return out;
}

double weighted_reward(const std::vector<double>& components, const RewardSpec& spec) {
  if (components.size() != spec.components.size()) {
    throw std::invalid_argument("weighted_reward: component count mismatch");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < components.size(); ++k) s += spec.components[k].weight * components[k];
  return s;
}

}  // namespace rrg::rewards
