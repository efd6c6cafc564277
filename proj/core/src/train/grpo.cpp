#include "rrg/train/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "rrg/numkit/ops.hpp"

namespace rrg::train {

using numkit::Tensor;

void GrpoConfig::validate() const {
  if (group_size < 2) throw std::invalid_argument("grpo: group size must be at least 2");
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw std::invalid_argument("grpo: clip eps must lie in (0, 1)");
  if (!(beta >= 0.0)) throw std::invalid_argument("grpo: beta must be non-negative");
  if (inner_steps < 1) throw std::invalid_argument("grpo: inner steps must be at least 1");
  if (prompts_per_step < 1) throw std::invalid_argument("grpo: prompts per step must be at least 1");
  if (!(temperature > 0.0)) throw std::invalid_argument("grpo: temperature must be positive");
  if (max_completion_tokens < 1) throw std::invalid_argument("grpo: max completion tokens must be positive");
}

CompletionValidity completion_validity_mask(std::span<const int> stream,
                                            const model::SpecialTokens& special) {
  CompletionValidity out;
  const std::size_t n = stream.empty() ? 0 : stream.size() - 1;
  out.mask.assign(n, 0);
  if (stream.empty() || stream.front() != special.bos) return out;
  const auto count = [&](int id) { return std::count(stream.begin(), stream.end(), id); };
  if (count(special.bos) != 1 || count(special.sep) != 1 || count(special.eos) != 1) return out;
  if (stream.back() != special.eos) return out;
  out.valid = true;
  std::fill(out.mask.begin(), out.mask.end(), 1);
  return out;
}

std::vector<std::vector<double>> normalised_components(const std::vector<std::vector<double>>& r) {
  const std::size_t g = r.size();
  const std::size_t k = g == 0 ? 0 : r.front().size();
  std::vector<std::vector<double>> a(g, std::vector<double>(k, 0.0));
  for (std::size_t c = 0; c < k; ++c) {
    double mu = 0.0;
    for (const auto& row : r) mu += row.at(c);
    mu /= static_cast<double>(g);
    double var = 0.0;
    for (const auto& row : r) var += (row[c] - mu) * (row[c] - mu);
    const double sd = std::sqrt(var / static_cast<double>(g));
    if (sd == 0.0) continue;
    for (std::size_t i = 0; i < g; ++i) a[i][c] = (r[i][c] - mu) / sd;
  }
  return a;
}

std::vector<double> group_normalised_advantages(const std::vector<std::vector<double>>& r,
                                                std::span<const double> weights) {
  if (r.size() < 2) throw std::invalid_argument("advantages: a group needs at least two completions");
  for (const auto& row : r) {
    if (row.size() != weights.size()) {
      throw std::invalid_argument("advantages: reward width " + std::to_string(row.size()) +
                                  " does not match " + std::to_string(weights.size()) + " weights");
    }
  }
  const auto a = normalised_components(r);
  std::vector<double> out(r.size(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t k = 0; k < weights.size(); ++k) out[i] += weights[k] * a[i][k];
  }
  return out;
}

double kl_estimate(double logp, double logp_ref) {
  if (!std::isfinite(logp) || !std::isfinite(logp_ref)) {
    throw numkit::NumericError("kl_estimate: non-finite log-probability");
  }
  const double d = logp_ref - logp;
  // expm1(d) - d equals exp(d) - d - 1 without cancellation near 0
  return std::max(0.0, std::expm1(d) - d);
}

Tensor grpo_loss(std::span<const Tensor> logp, std::span<const std::vector<double>> logp_old,
                 std::span<const std::vector<double>> logp_ref, std::span<const double> advantages,
                 std::span<const std::vector<int>> masks, double beta, double eps) {
  const std::size_t g = logp.size();
  if (logp_old.size() != g || logp_ref.size() != g || advantages.size() != g || masks.size() != g) {
    throw numkit::ShapeError("grpo_loss: group streams disagree in size");
  }
  double live = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    for (int m : masks[i]) live += m;
  }
  if (live == 0.0) throw EmptyGroup("grpo_loss: every completion of the group is masked out");

  // Per-token loss gradient d(loss)/d(logp), computed alongside the value.
  std::vector<std::vector<double>> dlogp(g);
  std::vector<Tensor> parents;
  std::vector<std::size_t> parent_of(g, g);
  double objective = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const std::size_t t_len = masks[i].size();
    if (logp_old[i].size() != t_len || logp_ref[i].size() != t_len) {
      throw numkit::ShapeError("grpo_loss: token streams of completion " + std::to_string(i) +
                               " are not aligned");
    }
    const bool any = std::any_of(masks[i].begin(), masks[i].end(), [](int m) { return m != 0; });
    if (!any) continue;
    if (!logp[i].defined() || logp[i].size() != t_len) {
      throw numkit::ShapeError("grpo_loss: log-probabilities of completion " + std::to_string(i) +
                               " are not aligned");
    }
    dlogp[i].assign(t_len, 0.0);
    const auto lp = logp[i].value().data();
    const double a = advantages[i];
    for (std::size_t t = 0; t < t_len; ++t) {
      if (masks[i][t] == 0) continue;
      const double rho = std::exp(lp[t] - logp_old[i][t]);
      const double clipped = std::clamp(rho, 1.0 - eps, 1.0 + eps);
      const double unclipped_term = rho * a;
      const double clipped_term = clipped * a;
      const double ratio_ref = std::exp(logp_ref[i][t] - lp[t]);
      objective += std::min(unclipped_term, clipped_term) - beta * kl_estimate(lp[t], logp_ref[i][t]);
      // min picks the unclipped branch on ties; the clipped branch is flat in
      // logp only when rho lies outside the clip range
      double d_min = 0.0;
      if (unclipped_term <= clipped_term || clipped == rho) d_min = unclipped_term;
      // d/dlogp of -beta * kl = beta * (ratio_ref - 1)
      dlogp[i][t] = -(d_min + beta * (ratio_ref - 1.0)) / live;
    }
    parent_of[i] = parents.size();
    parents.push_back(logp[i]);
  }
  Tensor out = Tensor::make(
      numkit::Array::scalar(-objective / live), parents,
      [dlogp = std::move(dlogp), parent_of, g](numkit::Node& self) {
        const double up = self.grad[0];
        for (std::size_t i = 0; i < g; ++i) {
          if (parent_of[i] == g) continue;
          auto buf = self.parents[parent_of[i]]->grad_buffer();
          for (std::size_t t = 0; t < dlogp[i].size(); ++t) buf[t] += up * dlogp[i][t];
        }
      });
  numkit::require_finite(out.value(), "grpo_loss");
  return out;
}

Tensor completion_log_probs(const model::PromptCache& cache, std::span<const int> completion,
                            const numkit::ParameterSet& params, const model::ModelConfig& config) {
  if (completion.empty()) throw std::invalid_argument("completion_log_probs: empty completion");
  const Tensor logits =
      model::decode_continuation(cache, completion.first(completion.size() - 1), params, config);
  return numkit::token_log_probs(logits, completion);
}

std::optional<rewards::ReportText> completion_text(std::span<const int> completion,
                                                   const model::Vocabulary& vocab,
                                                   const model::SpecialTokens& special) {
  std::vector<int> stream{special.bos};
  stream.insert(stream.end(), completion.begin(), completion.end());
  if (!completion_validity_mask(stream, special).valid) return std::nullopt;
  const auto parts = model::split_sections(stream, special);
  return rewards::ReportText{vocab.decode(parts.findings), vocab.decode(parts.impression)};
}

namespace {

std::vector<double> values_of(const Tensor& t) {
  const auto d = t.value().data();
  return {d.begin(), d.end()};
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32)};
  std::mt19937_64 rng(seq);
  return rng();
}

}  // namespace

GroupSample sample_group(const Example& prompt, std::size_t prompt_index,
                         const numkit::ParameterSet& policy,
                         const numkit::ParameterSet& reference, const GrpoContext& ctx,
                         std::uint64_t seed) {
  const auto& special = ctx.model.special;
  const numkit::ParameterSet behaviour = policy.detached();
  const numkit::ParameterSet ref = reference.detached();
  const model::PromptCache cache = model::encode_prompt(prompt.bundle, behaviour, ctx.model);
  const model::PromptCache ref_cache = model::encode_prompt(prompt.bundle, ref, ctx.model);

  model::GenerationOptions gen;
  gen.mode = model::DecodeMode::sample;
  gen.temperature = ctx.config.temperature;
  gen.max_tokens = std::min(ctx.config.max_completion_tokens, ctx.model.max_generated_tokens);
  std::mt19937_64 rng(mix(seed, prompt_index));

  GroupSample s;
  s.prompt = prompt_index;
  const std::size_t g = ctx.config.group_size;
  const std::size_t k = ctx.reward.components.size();
  for (std::size_t i = 0; i < g; ++i) {
    std::vector<int> completion = model::generate(cache, behaviour, ctx.model, gen, rng);
    std::vector<int> stream{special.bos};
    stream.insert(stream.end(), completion.begin(), completion.end());
    CompletionValidity v = completion_validity_mask(stream, special);
    if (v.valid) {
      s.logp_old.push_back(values_of(completion_log_probs(cache, completion, behaviour, ctx.model)));
      s.logp_ref.push_back(values_of(completion_log_probs(ref_cache, completion, ref, ctx.model)));
      s.rewards.push_back(rewards::composite_reward(
          completion_text(completion, ctx.vocab, special), prompt.reference, ctx.reward));
    } else {
      s.logp_old.emplace_back(completion.size(), 0.0);
      s.logp_ref.emplace_back(completion.size(), 0.0);
      s.rewards.emplace_back(k, 0.0);
    }
    s.valid.push_back(v.valid);
    s.masks.push_back(std::move(v.mask));
    s.completions.push_back(std::move(completion));
  }
  s.advantages = group_normalised_advantages(s.rewards, ctx.reward.weights());
  return s;
}

GrpoDiagnostics grpo_outer_step(std::span<const Example> batch, numkit::ParameterSet& policy,
                                const numkit::ParameterSet& reference, AdamW& optimizer,
                                double lr, const GrpoContext& ctx, std::uint64_t seed) {
  ctx.config.validate();
  GrpoDiagnostics diag;
  diag.groups = batch.size();
  diag.component_means.assign(ctx.reward.components.size(), 0.0);
  const auto weights = ctx.reward.weights();

  std::vector<GroupSample> groups;
  std::size_t completions = 0;
  std::size_t invalid = 0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    groups.push_back(sample_group(batch[j], j, policy, reference, ctx, seed));
    for (std::size_t i = 0; i < groups.back().completions.size(); ++i) {
      ++completions;
      if (!groups.back().valid[i]) ++invalid;
      const auto& r = groups.back().rewards[i];
      for (std::size_t c = 0; c < r.size(); ++c) {
        diag.component_means[c] += r[c];
        diag.mean_reward += weights[c] * r[c];
      }
    }
  }
  if (completions > 0) {
    for (double& m : diag.component_means) m /= static_cast<double>(completions);
    diag.mean_reward /= static_cast<double>(completions);
    diag.invalid_fraction = static_cast<double>(invalid) / static_cast<double>(completions);
  }

  std::vector<bool> live(groups.size(), false);
  for (std::size_t j = 0; j < groups.size(); ++j) {
    live[j] = std::find(groups[j].valid.begin(), groups[j].valid.end(), true) != groups[j].valid.end();
    if (!live[j]) ++diag.skipped_groups;
  }
  const std::size_t live_groups = groups.size() - diag.skipped_groups;
  if (live_groups == 0) return diag;

  const auto is_decoder = [](const std::string& name) { return model::is_decoder_parameter(name); };
  for (std::size_t step = 0; step < ctx.config.inner_steps; ++step) {
    policy.zero_grad();
    // only decoder leaves record a graph; the rest are constants in this view
    const numkit::ParameterSet view = policy.shared_where(is_decoder);
    double loss_sum = 0.0;
    double kl_sum = 0.0;
    double kl_tokens = 0.0;
    for (std::size_t j = 0; j < groups.size(); ++j) {
      if (!live[j]) continue;
      const GroupSample& s = groups[j];
      const model::PromptCache cache = model::encode_prompt(batch[j].bundle, view, ctx.model);
      std::vector<Tensor> logp(s.completions.size());
      for (std::size_t i = 0; i < s.completions.size(); ++i) {
        if (!s.valid[i]) continue;
        logp[i] = completion_log_probs(cache, s.completions[i], view, ctx.model);
        const auto lp = logp[i].value().data();
        for (std::size_t t = 0; t < lp.size(); ++t) {
          if (step == 0) {
            diag.first_step_max_ratio_error = std::max(
                diag.first_step_max_ratio_error, std::abs(std::exp(lp[t] - s.logp_old[i][t]) - 1.0));
          }
          kl_sum += kl_estimate(lp[t], s.logp_ref[i][t]);
          kl_tokens += 1.0;
        }
      }
      const Tensor loss = grpo_loss(logp, s.logp_old, s.logp_ref, s.advantages, s.masks,
                                    ctx.config.beta, ctx.config.clip_eps);
      loss_sum += loss.item();
      numkit::backward(numkit::scale(loss, 1.0 / static_cast<double>(live_groups)));
    }
    optimizer.step(policy, lr, is_decoder);
    diag.losses.push_back(loss_sum / static_cast<double>(live_groups));
    diag.mean_kl = kl_tokens > 0.0 ? kl_sum / kl_tokens : 0.0;
  }
  return diag;
}

}  // namespace rrg::train
