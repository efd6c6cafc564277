#include <benchmark/benchmark.h>

#include <random>

#include "rrg/model/decoder.hpp"
#include "rrg/model/network.hpp"
#include "rrg/numkit/ops.hpp"
#include "rrg/rewards/metrics.hpp"
#include "rrg/stats/binomial.hpp"
#include "rrg/train/grpo.hpp"
#include "rrg/train/optimizer.hpp"
#include "rrg/train/sft.hpp"
#include "support/fixtures.hpp"

using namespace rrg;

namespace {

numkit::Array random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  numkit::Array a({rows, cols});
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = z(rng);
  return a;
}

struct TinyModel {
  model::Vocabulary vocab = testing::tiny_vocabulary();
  model::ModelConfig config = testing::tiny_config(vocab.size());
  model::PatchEncoder encoder{config};
  numkit::ParameterSet params = model::init_parameters(config, 1);
  std::vector<train::Example> examples;

  TinyModel() {
    std::mt19937_64 rng(2);
    std::vector<model::StudyRecord> studies;
    for (int i = 0; i < 4; ++i) studies.push_back(testing::tiny_study(rng, i % 2 == 0));
    examples = train::prepare_examples(studies, vocab, encoder, config);
  }
};

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = numkit::Tensor::leaf(random_matrix(n, n, 1), true);
  const auto b = numkit::Tensor::leaf(random_matrix(n, n, 2), true);
  for (auto _ : state) {
    auto loss = numkit::sum(numkit::matmul(a, b));
    numkit::backward(loss);
    benchmark::DoNotOptimize(a.grad());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64)->Arg(128);

// Full self-attention over L positions; cost grows with L^2.
void BM_SelfAttention(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  const auto x = numkit::Tensor::constant(random_matrix(len, 32, 3));
  const numkit::AttentionMask mask(len, len, true);
  for (auto _ : state) benchmark::DoNotOptimize(numkit::attention(x, x, x, mask, 4));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SelfAttention)->RangeMultiplier(2)->Range(64, 512)->Complexity(benchmark::oNSquared);

void BM_DecoderForward(benchmark::State& state) {
  TinyModel m;
  const auto frozen = m.params.detached();
  const auto& e = m.examples[0];
  const std::vector<int> inputs(e.target.begin(), e.target.end() - 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model::decoder_forward(e.bundle, inputs, frozen, m.config));
  }
}
BENCHMARK(BM_DecoderForward);

void BM_GreedyGeneration(benchmark::State& state) {
  TinyModel m;
  const auto frozen = m.params.detached();
  model::GenerationOptions gen;
  gen.max_tokens = 24;
  for (auto _ : state) {
    std::mt19937_64 rng(0);
    const auto cache = model::encode_prompt(m.examples[0].bundle, frozen, m.config);
    benchmark::DoNotOptimize(model::generate(cache, frozen, m.config, gen, rng));
  }
}
BENCHMARK(BM_GreedyGeneration);

void BM_SftStep(benchmark::State& state) {
  TinyModel m;
  train::AdamW opt;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train::sft_step(m.examples, m.params, opt, 1e-4, m.config));
  }
}
BENCHMARK(BM_SftStep);

void BM_GrpoLossBackward(benchmark::State& state) {
  TinyModel m;
  const auto& e = m.examples[0];
  const std::vector<std::vector<int>> completions(4, e.target);
  const auto cache0 = model::encode_prompt(e.bundle, m.params.detached(), m.config);
  std::vector<std::vector<double>> old;
  for (const auto& c : completions) {
    const auto lp = train::completion_log_probs(cache0, c, m.params.detached(), m.config).value();
    old.emplace_back(lp.data().begin(), lp.data().end());
  }
  const std::vector<double> adv{1.0, -0.5, 0.2, -0.7};
  std::vector<std::vector<int>> masks;
  for (const auto& c : completions) masks.emplace_back(c.size(), 1);
  for (auto _ : state) {
    m.params.zero_grad();
    const auto cache = model::encode_prompt(e.bundle, m.params, m.config);
    std::vector<numkit::Tensor> lp;
    for (const auto& c : completions) {
      lp.push_back(train::completion_log_probs(cache, c, m.params, m.config));
    }
    auto loss = train::grpo_loss(lp, old, old, adv, masks, 0.04, 0.2);
    numkit::backward(loss);
  }
}
BENCHMARK(BM_GrpoLossBackward);

const char* kHypothesis =
    "moderate right pleural effusion , worsened . mild interstitial pulmonary edema . the heart is "
    "mildly enlarged .";
const char* kReference =
    "moderate right pleural effusion , unchanged . mild interstitial pulmonary edema . previously "
    "seen atelectasis has resolved .";

void BM_Bleu4(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(rewards::bleu4(kHypothesis, kReference));
}
BENCHMARK(BM_Bleu4);

void BM_RougeL(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(rewards::rouge_l(kHypothesis, kReference));
}
BENCHMARK(BM_RougeL);

void BM_Arn(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(rewards::arn(kHypothesis));
}
BENCHMARK(BM_Arn);

void BM_ExactBinomialTest(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(stats::exact_binomial_test(161, 360, 0.5));
}
BENCHMARK(BM_ExactBinomialTest);

void BM_BinomialPower(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(stats::binomial_power(720, 0.5, 199.0 / 360.0, 0.05));
  }
}
BENCHMARK(BM_BinomialPower);

}  // namespace

BENCHMARK_MAIN();
