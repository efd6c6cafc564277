#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "rrg/model/decoder.hpp"
#include "rrg/model/network.hpp"
#include "rrg/numkit/grad_check.hpp"
#include "rrg/numkit/ops.hpp"
#include "rrg/train/grpo.hpp"
#include "rrg/train/optimizer.hpp"
#include "rrg/train/schedule.hpp"
#include "rrg/train/sft.hpp"
#include "rrg/train/trainer.hpp"
#include "support/fixtures.hpp"

using namespace rrg;
using namespace rrg::train;
using numkit::Tensor;

namespace {

struct Toy {
  model::Vocabulary vocab = testing::tiny_vocabulary();
  model::ModelConfig config = testing::tiny_config(vocab.size());
  model::PatchEncoder encoder{config};
  numkit::ParameterSet params = model::init_parameters(config, 3);
  std::vector<Example> examples;

  explicit Toy(std::size_t n = 2) {
    std::mt19937_64 rng(21);
    std::vector<model::StudyRecord> studies;
    for (std::size_t i = 0; i < n; ++i) {
      auto s = testing::tiny_study(rng, i % 2 == 0);
      s.study_id = "s" + std::to_string(i);
      studies.push_back(std::move(s));
    }
    examples = prepare_examples(studies, vocab, encoder, config);
  }
};

std::vector<double> values(const Tensor& t) {
  const auto d = t.value().data();
  return {d.begin(), d.end()};
}

}  // namespace

TEST_CASE("learning rate schedule") {
  CHECK(lr_schedule(0, 100, 10, 1.0, 2) == 0.0);
  CHECK(lr_schedule(5, 100, 10, 1.0, 2) == doctest::Approx(0.5));
  CHECK(lr_schedule(10, 100, 10, 1.0, 2) == doctest::Approx(1.0));
  CHECK(lr_schedule(10, 90, 10, 2.0, 2) == doctest::Approx(2.0));
  CHECK(lr_schedule(30, 90, 10, 2.0, 2) == doctest::Approx(1.0).epsilon(1e-12));  // frac 0.5
  CHECK(lr_schedule(50, 90, 10, 2.0, 2) == doctest::Approx(2.0));                 // hard restart
  CHECK(lr_schedule(70, 90, 10, 2.0, 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lr_schedule(49, 90, 10, 2.0, 2) < 0.01);
  CHECK(lr_schedule(90, 90, 10, 2.0, 2) == 0.0);
  CHECK_THROWS_AS(lr_schedule(0, 10, 10, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(lr_schedule(0, 10, 2, 1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(lr_schedule(11, 10, 2, 1.0, 1), std::invalid_argument);
  for (std::size_t s = 0; s <= 90; ++s) {
    const double lr = lr_schedule(s, 90, 10, 2.0, 3);
    CHECK(lr >= 0.0);
    CHECK(lr <= 2.0);
  }
  CHECK(constant_schedule(0, 4, 1.0) == 0.0);
  CHECK(constant_schedule(2, 4, 1.0) == 0.5);
  CHECK(constant_schedule(40, 4, 1.0) == 1.0);
}

TEST_CASE("adamw matches a hand-computed first step and skips frozen parameters") {
  numkit::ParameterSet p;
  p.add("w", numkit::Array::vector({1.0, -2.0}));
  p.add("frozen", numkit::Array::vector({3.0}), true);
  p.add("other", numkit::Array::vector({4.0}));
  numkit::backward(numkit::sum(numkit::scale(p.get("w"), 0.5)));
  numkit::backward(numkit::sum(numkit::add(p.get("frozen"), p.get("other"))));
  AdamW opt;
  opt.step(p, 0.1, [](const std::string& n) { return n != "other"; });
  // First step: m/(1-b1) = g, v/(1-b2) = g^2, update = g / (|g| + eps) ~ sign(g).
  const double upd = 0.5 / (0.5 + 1e-8);
  CHECK(p.get("w").value()[0] == doctest::Approx(1.0 - 0.1 * (upd + 0.01 * 1.0)).epsilon(1e-14));
  CHECK(p.get("w").value()[1] == doctest::Approx(-2.0 - 0.1 * (upd + 0.01 * -2.0)).epsilon(1e-14));
  CHECK(p.get("frozen").value()[0] == 3.0);
  CHECK(p.get("other").value()[0] == 4.0);
}

TEST_CASE("sft loss and step") {
  Toy toy;
  REQUIRE(toy.examples.size() == 2);
  const auto& e = toy.examples[0];
  CHECK(e.target.back() == model::Vocabulary::kEos);
  CHECK(std::count(e.target.begin(), e.target.end(), model::Vocabulary::kSep) == 1);

  const double loss = sft_loss(toy.examples, toy.params, toy.config).item();
  CHECK(std::abs(loss - std::log(static_cast<double>(toy.vocab.size()))) < 1.5);

  // Rigged logits: every target is token 7 and the output bias makes it certain.
  Example rigged = e;
  rigged.target.assign(5, 7);
  auto params = toy.params.clone();
  params.at("decoder.lm_bias").tensor.mutable_value()[7] = 1e3;
  const std::vector<Example> one{rigged};
  CHECK(sft_loss(one, params, toy.config).item() < 1e-9);
  CHECK_THROWS_AS(sft_loss(std::span<const Example>{}, toy.params, toy.config), std::invalid_argument);

  auto trained = toy.params.clone();
  const auto before = trained.get("encoder.projection").value();
  AdamW opt;
  double first = 0.0;
  for (int i = 0; i < 15; ++i) {
    const double l = sft_step(toy.examples, trained, opt, 3e-3, toy.config);
    if (i == 0) first = l;
  }
  CHECK(trained.get("encoder.projection").value() == before);
  CHECK(sft_loss(toy.examples, trained, toy.config).item() < first);
  const auto acc = teacher_forced_accuracy(toy.examples, trained, toy.config);
  CHECK(acc.total == toy.examples[0].target.size() + toy.examples[1].target.size());
}

TEST_CASE("completion validity") {
  const model::SpecialTokens sp;
  const auto ok = completion_validity_mask(std::vector<int>{1, 9, 2, 10, 3}, sp);
  CHECK(ok.valid);
  CHECK(ok.mask == std::vector<int>{1, 1, 1, 1});
  const auto two_sep = completion_validity_mask(std::vector<int>{1, 9, 2, 2, 10, 3}, sp);
  CHECK_FALSE(two_sep.valid);
  CHECK(two_sep.mask == std::vector<int>(5, 0));
  CHECK_FALSE(completion_validity_mask(std::vector<int>{1, 9, 2, 10, 11}, sp).valid);  // truncated
  CHECK_FALSE(completion_validity_mask(std::vector<int>{1, 9, 1, 2, 10, 3}, sp).valid);
  CHECK_FALSE(completion_validity_mask(std::vector<int>{9, 2, 10, 3}, sp).valid);
  CHECK_FALSE(completion_validity_mask(std::vector<int>{1, 9, 3, 2}, sp).valid);
  CHECK_FALSE(completion_validity_mask(std::vector<int>{}, sp).valid);

  const auto vocab = testing::tiny_vocabulary();
  const int cough = vocab.id("cough");
  const auto text = completion_text(std::vector<int>{cough, 2, cough, 3}, vocab, sp);
  REQUIRE(text);
  CHECK(text->findings == "cough");
  CHECK(text->impression == "cough");
  CHECK_FALSE(completion_text(std::vector<int>{cough, 3}, vocab, sp));
}

TEST_CASE("group normalised advantages") {
  const std::vector<double> w1{1.0};
  const auto a = group_normalised_advantages({{0}, {1}, {0}, {1}}, w1);
  CHECK(a == std::vector<double>{-1, 1, -1, 1});
  const auto flat = group_normalised_advantages({{0.3}, {0.3}, {0.3}}, w1);
  CHECK(flat == std::vector<double>{0, 0, 0});
  const std::vector<double> zero{0.0, 0.0};
  CHECK(group_normalised_advantages({{0.1, 0.5}, {0.9, 0.2}}, zero) == std::vector<double>{0, 0});
  CHECK_THROWS_AS(group_normalised_advantages({{0.1}}, w1), std::invalid_argument);
  CHECK_THROWS_AS(group_normalised_advantages({{0.1, 0.2}, {0.3, 0.4}}, w1), std::invalid_argument);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> r(4, std::vector<double>(4));
    for (auto& row : r) {
      for (double& v : row) v = u(rng);
    }
    if (trial % 3 == 0) {
      for (auto& row : r) row[2] = 0.25;  // degenerate column
    }
    const auto n = normalised_components(r);
    for (std::size_t k = 0; k < 4; ++k) {
      double s = 0.0;
      for (const auto& row : n) s += row[k];
      CHECK(std::abs(s) < 1e-10);
    }
    if (trial % 3 == 0) {
      for (const auto& row : n) CHECK(row[2] == 0.0);
    }
  }
}

TEST_CASE("kl estimate") {
  CHECK(kl_estimate(-1.3, -1.3) == 0.0);
  CHECK(kl_estimate(0.0, std::log(2.0)) == doctest::Approx(2.0 - std::log(2.0) - 1.0).epsilon(1e-14));
  CHECK(kl_estimate(0.0, std::log(2.0)) == doctest::Approx(0.306853).epsilon(1e-6));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 2.0);
  for (int i = 0; i < 1000; ++i) CHECK(kl_estimate(z(rng), z(rng)) >= 0.0);
  CHECK_THROWS_AS(kl_estimate(std::nan(""), 0.0), numkit::NumericError);
  CHECK_THROWS_AS(kl_estimate(0.0, -INFINITY), numkit::NumericError);
}

TEST_CASE("grpo loss hand cases") {
  auto leaf = [](std::vector<double> v) {
    return Tensor::leaf(numkit::Array::vector(std::move(v)), true);
  };
  // rho = 1.5, A = 1: min(1.5, 1.2) -> loss -1.2
  {
    const std::vector<Tensor> lp{leaf({std::log(1.5)})};
    const std::vector<std::vector<double>> old{{0.0}}, ref{{0.0}};
    const std::vector<double> adv{1.0};
    const std::vector<std::vector<int>> m{{1}};
    CHECK(grpo_loss(lp, old, ref, adv, m, 0.0, 0.2).item() == doctest::Approx(-1.2).epsilon(1e-12));
  }
  // rho = 0.5, A = -1: min(-0.5, -0.8) -> loss 0.8
  {
    const std::vector<Tensor> lp{leaf({std::log(0.5)})};
    const std::vector<std::vector<double>> old{{0.0}}, ref{{0.0}};
    const std::vector<double> adv{-1.0};
    const std::vector<std::vector<int>> m{{1}};
    CHECK(grpo_loss(lp, old, ref, adv, m, 0.0, 0.2).item() == doctest::Approx(0.8).epsilon(1e-12));
  }
  // theta = old = ref: -(sum m A) / sum m
  {
    const std::vector<Tensor> lp{leaf({-1.0, -2.0, -0.5}), leaf({-0.3, -0.7}), Tensor{}};
    const std::vector<std::vector<double>> old{{-1.0, -2.0, -0.5}, {-0.3, -0.7}, {0.0}};
    const std::vector<double> adv{0.7, -1.1, 3.0};
    const std::vector<std::vector<int>> m{{1, 1, 0}, {1, 1}, {0}};
    const double expect = -(0.7 * 2 - 1.1 * 2) / 4.0;
    CHECK(std::abs(grpo_loss(lp, old, old, adv, m, 0.04, 0.2).item() - expect) < 1e-10);
    const std::vector<std::vector<int>> none{{0, 0, 0}, {0, 0}, {0}};
    CHECK_THROWS_AS(grpo_loss(lp, old, old, adv, none, 0.04, 0.2), EmptyGroup);
  }
}

TEST_CASE("grpo loss gradient matches finite differences") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> z(0.0, 1.0);
  // Direct check on the log-probability inputs, away from clip boundaries.
  numkit::ParameterSet p;
  p.add("a", numkit::Array::vector({-1.0, -0.4, -2.2, -0.9}));
  p.add("b", numkit::Array::vector({-0.2, -1.7, -0.6}));
  const std::vector<std::vector<double>> old{{-1.05, -0.1, -2.2, -1.5}, {-0.25, -1.6, -0.9}};
  const std::vector<std::vector<double>> ref{{-0.8, -0.5, -2.0, -1.0}, {-0.4, -1.5, -0.3}};
  const std::vector<double> adv{0.8, -1.3};
  const std::vector<std::vector<int>> m{{1, 1, 1, 0}, {1, 1, 1}};
  auto f = [&](const numkit::ParameterSet& q) {
    const std::vector<Tensor> lp{q.get("a"), q.get("b")};
    return grpo_loss(lp, old, ref, adv, m, 0.04, 0.2);
  };
  const auto direct = numkit::grad_check(f, p, 1e-6, 1e-6);
  CHECK(direct.passed());

  // Through the model.
  Toy toy(1);
  const auto& e = toy.examples[0];
  const auto target = e.target;
  const auto completion2 = std::vector<int>(target.begin() + 1, target.end());
  const std::vector<std::vector<int>> completions{target, completion2};
  const auto cache0 = model::encode_prompt(e.bundle, toy.params.detached(), toy.config);
  std::vector<std::vector<double>> lold, lref;
  for (const auto& c : completions) {
    auto v = values(completion_log_probs(cache0, c, toy.params.detached(), toy.config));
    auto r = v;
    for (double& x : v) x += 0.03 * z(rng);
    for (double& x : r) x += 0.1 * z(rng);
    lold.push_back(v);
    lref.push_back(r);
  }
  const std::vector<double> advantages{1.0, -1.0};
  const std::vector<std::vector<int>> masks{std::vector<int>(completions[0].size(), 1),
                                            std::vector<int>(completions[1].size(), 1)};
  auto g = [&](const numkit::ParameterSet& q) {
    const auto cache = model::encode_prompt(e.bundle, q, toy.config);
    std::vector<Tensor> lp;
    for (const auto& c : completions) lp.push_back(completion_log_probs(cache, c, q, toy.config));
    return grpo_loss(lp, lold, lref, advantages, masks, 0.04, 0.2);
  };
  numkit::GradCheckOptions opts;
  opts.max_elements_per_parameter = 6;
  opts.seed = 1;
  const auto report = numkit::grad_check(g, toy.params, 1e-5, 1e-4, opts);
  CHECK(report.pass_fraction() >= 0.999);
}

TEST_CASE("grpo step raises log-probability of sampled completions when every advantage is 1") {
  Toy toy(1);
  const auto& e = toy.examples[0];
  auto policy = toy.params.clone();
  const auto cache = model::encode_prompt(e.bundle, policy.detached(), toy.config);
  model::GenerationOptions gen;
  gen.mode = model::DecodeMode::sample;
  gen.max_tokens = 12;
  std::mt19937_64 rng(5);
  std::vector<std::vector<int>> completions;
  for (int i = 0; i < 4; ++i) completions.push_back(model::generate(cache, policy, toy.config, gen, rng));
  std::vector<std::vector<double>> old;
  std::vector<std::vector<int>> masks;
  for (const auto& c : completions) {
    old.push_back(values(completion_log_probs(cache, c, policy.detached(), toy.config)));
    masks.emplace_back(c.size(), 1);  // sign check: every token live
  }
  auto masked_mean = [&](const numkit::ParameterSet& q) {
    const auto cq = model::encode_prompt(e.bundle, q.detached(), toy.config);
    double s = 0.0, n = 0.0;
    for (const auto& c : completions) {
      for (double v : values(completion_log_probs(cq, c, q.detached(), toy.config))) {
        s += v;
        n += 1;
      }
    }
    return s / n;
  };
  const double before = masked_mean(policy);
  const std::vector<double> adv(4, 1.0);
  const auto view = policy.shared_where([](const std::string& n) { return model::is_decoder_parameter(n); });
  const auto cq = model::encode_prompt(e.bundle, view, toy.config);
  std::vector<Tensor> lp;
  for (const auto& c : completions) lp.push_back(completion_log_probs(cq, c, view, toy.config));
  numkit::backward(grpo_loss(lp, old, old, adv, masks, 0.0, 0.2));
  AdamW opt;
  opt.step(policy, 1e-3, [](const std::string& n) { return model::is_decoder_parameter(n); });
  CHECK(masked_mean(policy) > before);
}

TEST_CASE("grpo outer step") {
  Toy toy(2);
  // A short warm-up so that sampled completions are mostly well formed.
  AdamW warm;
  for (int i = 0; i < 60; ++i) sft_step(toy.examples, toy.params, warm, 1e-2, toy.config);
  auto policy = toy.params.clone();
  const auto reference = toy.params.clone();
  const auto ref_before = reference.clone();
  const auto rspec = rewards::RewardSpec::defaults();
  GrpoConfig cfg;
  cfg.max_completion_tokens = 16;
  cfg.learning_rate = 1e-3;
  const GrpoContext ctx{toy.config, toy.vocab, rspec, cfg};
  AdamW opt;
  const auto d = grpo_outer_step(toy.examples, policy, reference, opt, 1e-3, ctx, 77);
  CHECK(d.groups == 2);
  CHECK(d.invalid_fraction >= 0.0);
  CHECK(d.invalid_fraction <= 1.0);
  CHECK(reference.bitwise_equal(ref_before));
  REQUIRE(d.skipped_groups < d.groups);
  CHECK(d.invalid_fraction < 1.0);
  CHECK(d.losses.size() == 3);
  CHECK(d.first_step_max_ratio_error < 1e-12);
  CHECK(d.mean_kl > 0.0);
  for (const auto& p : policy.items()) {
    if (!model::is_decoder_parameter(p.name)) {
      CHECK_MESSAGE(p.tensor.value() == toy.params.get(p.name).value(), p.name);
    }
  }

  // Same seed, same trajectory.
  auto policy2 = toy.params.clone();
  AdamW opt2;
  const auto d2 = grpo_outer_step(toy.examples, policy2, reference, opt2, 1e-3, ctx, 77);
  CHECK(policy2.bitwise_equal(policy));
  CHECK(d2.losses == d.losses);

  // A group whose completions are all invalid is skipped and counted.
  auto broken = toy.params.clone();
  broken.at("decoder.lm_bias").tensor.mutable_value()[toy.vocab.id("cough")] = 1e3;
  AdamW opt3;
  const auto d3 = grpo_outer_step(toy.examples, broken, reference, opt3, 1e-3, ctx, 1);
  CHECK(d3.skipped_groups == 2);
  CHECK(d3.invalid_fraction == 1.0);
  CHECK(d3.losses.empty());
}

TEST_CASE("checkpoint selection and validation schedule") {
  CHECK(select_checkpoint(std::vector<double>{0.5}) == 0);
  CHECK(select_checkpoint(std::vector<double>{0.5, 0.7, 0.6}) == 1);
  CHECK(select_checkpoint(std::vector<double>{0.7, 0.7}) == 0);
  CHECK_THROWS_AS(select_checkpoint(std::vector<double>{}), std::invalid_argument);

  CHECK(validation_schedule(10, 1, 5) == std::vector<std::size_t>{2, 4, 6, 8, 10});
  CHECK(validation_schedule(12, 2, 5) ==
        std::vector<std::size_t>{3, 5, 8, 10, 12, 15, 17, 20, 22, 24});
  CHECK(validation_schedule(3, 1, 5) == std::vector<std::size_t>{1, 2, 3});
  for (std::size_t steps = 1; steps < 60; ++steps) {
    const auto s = validation_schedule(steps, 1, 5);
    CHECK(s.back() == steps);
    CHECK(s.size() == std::min<std::size_t>(5, steps));
  }
}

TEST_CASE("sft and grpo runs write their artifacts") {
  Toy toy(4);
  const auto dir = std::filesystem::temp_directory_path() / "rrg_test_train";
  std::filesystem::remove_all(dir);
  auto params = toy.params.clone();
  const auto rspec = rewards::RewardSpec::defaults();
  SftConfig sc;
  sc.epochs = 2;
  sc.batch_size = 2;
  sc.warmup = 1;
  const auto sft = run_sft(toy.examples, toy.examples, params, toy.config, toy.vocab, rspec, sc, dir);
  REQUIRE(sft.checkpoints.size() == 2);
  CHECK(std::filesystem::exists(sft.checkpoints[1].path));
  CHECK(std::filesystem::exists(dir / "sft_log.tsv"));
  CHECK(std::filesystem::exists(dir / "sft_config.ini"));

  const auto best = load_checkpoint(sft.checkpoints[sft.best].path);
  CHECK(best.at("encoder.projection").frozen);
  auto policy = best.clone();
  const auto ref_before = best.clone();
  GrpoConfig gc;
  gc.max_completion_tokens = 12;
  gc.prompts_per_step = 1;
  gc.learning_rate = 1e-4;
  const auto grpo = run_grpo(toy.examples, toy.examples, policy, best, toy.config, toy.vocab,
                             rspec, gc, 3, dir);
  CHECK(best.bitwise_equal(ref_before));
  CHECK(grpo.steps == 4);
  REQUIRE(grpo.validations.size() == 5);  // start plus 4 single-step fifths
  CHECK(grpo.validations.front().step == 0);
  CHECK(std::filesystem::exists(grpo.final_checkpoint));
  std::ifstream log(dir / "grpo_log.tsv");
  std::string header;
  std::getline(log, header);
  CHECK(header == "step\tepoch\tlr\tloss\tkl\treward\tbleu4\trougeL\tsection_f1\tarn\tinvalid_fraction\tskipped_groups");
  std::filesystem::remove_all(dir);
}
