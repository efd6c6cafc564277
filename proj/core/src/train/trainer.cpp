#include "rrg/train/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <random>
#include <stdexcept>
#include <utility>

#include "rrg/model/decoder.hpp"
#include "rrg/train/schedule.hpp"

namespace rrg::train {

SftConfig SftConfig::paper_preset() {
  SftConfig c;
  c.peak_lr = 5e-5;
  c.warmup = 500;
  c.epochs = 5;
  c.cycles = 5;
  c.batch_size = 16;
  return c;
}

void SftConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("sft: epochs must be at least 1");
  if (cycles < 1) throw std::invalid_argument("sft: cycles must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("sft: batch size must be at least 1");
  if (!(peak_lr > 0.0)) throw std::invalid_argument("sft: peak learning rate must be positive");
  if (selection_metric != "composite" && selection_metric != "accuracy") {
    throw std::invalid_argument("sft: unknown selection metric '" + selection_metric +
                                "' (expected composite or accuracy)");
  }
}

GrpoConfig grpo_paper_preset() {
  GrpoConfig c;
  c.learning_rate = 1e-6;
  c.warmup = 500;
  c.epochs = 2;
  c.prompts_per_step = 8;
  return c;
}

std::size_t select_checkpoint(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("select_checkpoint: no scored checkpoints");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::vector<std::size_t> validation_schedule(std::size_t steps_per_epoch, std::size_t epochs,
                                             std::size_t per_epoch) {
  std::vector<std::size_t> out;
  if (steps_per_epoch == 0 || per_epoch == 0) return out;
  for (std::size_t e = 0; e < epochs; ++e) {
    for (std::size_t k = 1; k <= per_epoch; ++k) {
      // ceil(k * steps / per_epoch) keeps points evenly spaced and ends on the last step
      const std::size_t at = (k * steps_per_epoch + per_epoch - 1) / per_epoch;
      const std::size_t step = e * steps_per_epoch + std::max<std::size_t>(at, 1);
      if (out.empty() || out.back() != step) out.push_back(step);
    }
  }
  return out;
}

numkit::ParameterSet load_checkpoint(const std::filesystem::path& path) {
  numkit::ParameterSet params = numkit::load_snapshot(path);
  params.set_frozen_where([](const std::string& n) { return n.starts_with("encoder."); }, true);
  return params;
}

Evaluation evaluate_greedy(std::span<const Example> examples, const numkit::ParameterSet& params,
                           const model::ModelConfig& model, const model::Vocabulary& vocab,
                           const rewards::RewardSpec& reward, std::size_t max_tokens) {
  const numkit::ParameterSet frozen = params.detached();
  const auto weights = reward.weights();
  Evaluation ev;
  ev.component_means.assign(weights.size(), 0.0);
  model::GenerationOptions gen;
  gen.mode = model::DecodeMode::greedy;
  gen.max_tokens = std::min(max_tokens, model.max_generated_tokens);
  std::mt19937_64 unused(0);
  std::size_t invalid = 0;
  for (const auto& e : examples) {
    const model::PromptCache cache = model::encode_prompt(e.bundle, frozen, model);
    GeneratedReport r;
    r.study_id = e.study_id;
    r.tokens = model::generate(cache, frozen, model, gen, unused);
    r.text = completion_text(r.tokens, vocab, model.special);
    if (!r.text) ++invalid;
    auto scores = rewards::composite_reward(r.text, e.reference, reward);
    for (std::size_t k = 0; k < scores.size(); ++k) {
      ev.component_means[k] += scores[k];
      ev.mean_reward += weights[k] * scores[k];
    }
    ev.scores.push_back(std::move(scores));
    ev.reports.push_back(std::move(r));
  }
  if (!examples.empty()) {
    const auto n = static_cast<double>(examples.size());
    for (double& m : ev.component_means) m /= n;
    ev.mean_reward /= n;
    ev.invalid_fraction = static_cast<double>(invalid) / n;
  }
  return ev;
}

namespace {

std::ofstream open_log(const std::filesystem::path& path, const std::string& header) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(10) << header << '\n';
  return out;
}

using Entries = std::vector<std::pair<std::string, std::string>>;

void write_ini(const std::filesystem::path& path, const std::string& section, const Entries& e) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << '[' << section << "]\n";
  for (const auto& [k, v] : e) out << k << " = " << v << '\n';
}

template <typename T>
std::string str(T v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

SftResult run_sft(std::span<const Example> train, std::span<const Example> validation,
                  numkit::ParameterSet& params, const model::ModelConfig& model,
                  const model::Vocabulary& vocab, const rewards::RewardSpec& reward,
                  const SftConfig& config, const std::filesystem::path& run_dir) {
  config.validate();
  if (train.empty()) throw std::invalid_argument("run_sft: empty training set");
  std::filesystem::create_directories(run_dir / "checkpoints");
  write_ini(run_dir / "sft_config.ini", "sft",
            {{"peak_lr", str(config.peak_lr)},
             {"warmup", str(config.warmup)},
             {"epochs", str(config.epochs)},
             {"cycles", str(config.cycles)},
             {"batch_size", str(config.batch_size)},
             {"selection_metric", config.selection_metric},
             {"seed", str(config.seed)},
             {"weight_decay", str(config.adamw.weight_decay)}});
  auto log = open_log(run_dir / "sft_log.tsv", "step\tepoch\tlr\tloss");
  auto val_log = open_log(run_dir / "sft_validation.tsv",
                          "epoch\tstep\taccuracy\treward\tinvalid_fraction\tcheckpoint");

  const std::size_t per_epoch = (train.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total = per_epoch * config.epochs;
  AdamW opt(config.adamw);
  std::vector<std::size_t> order(train.size());
  std::vector<Example> batch;
  SftResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(config.seed * 1000003ULL + epoch);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < per_epoch; ++b) {
      batch.clear();
      for (std::size_t i = b * config.batch_size;
           i < std::min(train.size(), (b + 1) * config.batch_size); ++i) {
        batch.push_back(train[order[i]]);
      }
      const double lr = lr_schedule(step, total, config.warmup, config.peak_lr, config.cycles);
      const double loss = sft_step(batch, params, opt, lr, model);
      ++step;
      log << step << '\t' << epoch << '\t' << lr << '\t' << loss << '\n';
    }
    log.flush();
    CheckpointRecord rec;
    rec.id = "sft_epoch" + std::to_string(epoch);
    rec.path = run_dir / "checkpoints" / (rec.id + ".cxl2");
    rec.epoch = epoch;
    rec.step = step;
    rec.accuracy = teacher_forced_accuracy(validation, params, model).value();
    const Evaluation ev =
        evaluate_greedy(validation, params, model, vocab, reward, model.max_generated_tokens);
    rec.reward = ev.mean_reward;
    numkit::save_snapshot(rec.path, params);
    val_log << epoch << '\t' << step << '\t' << rec.accuracy << '\t' << rec.reward << '\t'
            << ev.invalid_fraction << '\t' << rec.id << '\n';
    val_log.flush();
    result.checkpoints.push_back(rec);
  }
  std::vector<double> scores;
  for (const auto& c : result.checkpoints) {
    scores.push_back(config.selection_metric == "accuracy" ? c.accuracy : c.reward);
  }
  result.best = select_checkpoint(scores);
  return result;
}

GrpoResult run_grpo(std::span<const Example> train, std::span<const Example> validation,
                    numkit::ParameterSet& policy, const numkit::ParameterSet& reference,
                    const model::ModelConfig& model, const model::Vocabulary& vocab,
                    const rewards::RewardSpec& reward, const GrpoConfig& config,
                    std::uint64_t seed, const std::filesystem::path& run_dir) {
  config.validate();
  reward.validate();
  if (train.empty()) throw std::invalid_argument("run_grpo: empty training set");
  std::filesystem::create_directories(run_dir / "checkpoints");
  write_ini(run_dir / "grpo_config.ini", "grpo",
            {{"group_size", str(config.group_size)},
             {"beta", str(config.beta)},
             {"clip_eps", str(config.clip_eps)},
             {"inner_steps", str(config.inner_steps)},
             {"temperature", str(config.temperature)},
             {"max_completion_tokens", str(config.max_completion_tokens)},
             {"learning_rate", str(config.learning_rate)},
             {"warmup", str(config.warmup)},
             {"epochs", str(config.epochs)},
             {"prompts_per_step", str(config.prompts_per_step)},
             {"prompts_per_epoch", str(config.prompts_per_epoch)},
             {"validations_per_epoch", str(config.validations_per_epoch)},
             {"seed", str(seed)}});
  std::string header = "step\tepoch\tlr\tloss\tkl\treward";
  for (const auto& n : reward.names()) header += "\t" + n;
  header += "\tinvalid_fraction\tskipped_groups";
  auto log = open_log(run_dir / "grpo_log.tsv", header);
  auto val_log = open_log(run_dir / "grpo_validation.tsv", "step\treward\tinvalid_fraction");

  const std::size_t epoch_prompts = config.prompts_per_epoch == 0
                                        ? train.size()
                                        : std::min(config.prompts_per_epoch, train.size());
  const std::size_t per_epoch =
      (epoch_prompts + config.prompts_per_step - 1) / config.prompts_per_step;
  const auto schedule = validation_schedule(per_epoch, config.epochs, config.validations_per_epoch);
  const GrpoContext ctx{model, vocab, reward, config};
  AdamW opt;
  GrpoResult result;

  auto validate_at = [&](std::size_t step) {
    const Evaluation ev = evaluate_greedy(validation, policy, model, vocab, reward,
                                          config.max_completion_tokens);
    result.validations.push_back({step, ev.mean_reward, ev.invalid_fraction});
    val_log << step << '\t' << ev.mean_reward << '\t' << ev.invalid_fraction << '\n';
    val_log.flush();
  };
  validate_at(0);

  std::vector<std::size_t> order(train.size());
  std::vector<Example> batch;
  std::size_t step = 0;
  std::size_t next_validation = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed * 1000003ULL + epoch);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < per_epoch; ++b) {
      batch.clear();
      for (std::size_t i = b * config.prompts_per_step;
           i < std::min(epoch_prompts, (b + 1) * config.prompts_per_step); ++i) {
        batch.push_back(train[order[i]]);
      }
      const double lr = constant_schedule(step, config.warmup, config.learning_rate);
      ++step;
      const GrpoDiagnostics d = grpo_outer_step(batch, policy, reference, opt, lr, ctx,
                                                seed * 7919ULL + step);
      result.skipped_groups += d.skipped_groups;
      log << step << '\t' << epoch << '\t' << lr << '\t'
          << (d.losses.empty() ? 0.0 : d.losses.back()) << '\t' << d.mean_kl << '\t'
          << d.mean_reward;
      for (double m : d.component_means) log << '\t' << m;
      log << '\t' << d.invalid_fraction << '\t' << d.skipped_groups << '\n';
      log.flush();
      if (next_validation < schedule.size() && schedule[next_validation] == step) {
        validate_at(step);
        ++next_validation;
      }
    }
  }
  result.steps = step;
  result.final_checkpoint = run_dir / "checkpoints" / "grpo_final.cxl2";
  numkit::save_snapshot(result.final_checkpoint, policy);
  return result;
}

}  // namespace rrg::train
