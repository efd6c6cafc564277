#include "rrg/train/sft.hpp"

#include <algorithm>
#include <stdexcept>

#include "rrg/model/decoder.hpp"
#include "rrg/numkit/ops.hpp"

namespace rrg::train {

using numkit::Tensor;

std::vector<int> report_target(const std::string& findings, const std::string& impression,
                               const model::Vocabulary& vocab) {
  std::vector<int> out = vocab.encode(findings);
  out.push_back(model::Vocabulary::kSep);
  const auto imp = vocab.encode(impression);
  out.insert(out.end(), imp.begin(), imp.end());
  out.push_back(model::Vocabulary::kEos);
  return out;
}

std::vector<Example> prepare_examples(std::span<const model::StudyRecord> studies,
                                      const model::Vocabulary& vocab,
                                      const model::PatchEncoder& encoder,
                                      const model::ModelConfig& config,
                                      const model::AssembleOptions& options) {
  std::vector<Example> out;
  for (const auto& s : studies) {
    if (!s.has_training_target()) continue;
    Example e;
    e.study_id = s.study_id;
    e.bundle = model::assemble_prompt(s, vocab, encoder, config, options);
    e.reference = {*s.sections.get(model::Section::findings),
                   *s.sections.get(model::Section::impression)};
    e.target = report_target(e.reference.findings, e.reference.impression, vocab);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

// Logits whose row t predicts target[t].
Tensor teacher_forced_logits(const Example& e, const numkit::ParameterSet& params,
                             const model::ModelConfig& config) {
  const std::span<const int> inputs(e.target.data(), e.target.size() - 1);
  return model::decoder_forward(e.bundle, inputs, params, config);
}

}  // namespace

Tensor sft_loss(std::span<const Example> batch, const numkit::ParameterSet& params,
                const model::ModelConfig& config) {
  if (batch.empty()) throw std::invalid_argument("sft_loss: empty batch");
  std::size_t tokens = 0;
  for (const auto& e : batch) tokens += e.target.size();
  Tensor total;
  for (const auto& e : batch) {
    if (e.target.empty()) throw std::invalid_argument("sft_loss: empty target for " + e.study_id);
    const Tensor logits = teacher_forced_logits(e, params, config);
    const std::vector<int> mask(e.target.size(), 1);
    // cross_entropy averages per example; reweight to a batch token mean
    const Tensor part = numkit::scale(numkit::cross_entropy(logits, e.target, mask),
                                      static_cast<double>(e.target.size()) /
                                          static_cast<double>(tokens));
    total = total.defined() ? numkit::add(total, part) : part;
  }
  return total;
}

double sft_step(std::span<const Example> batch, numkit::ParameterSet& params, AdamW& optimizer,
                double lr, const model::ModelConfig& config) {
  params.zero_grad();
  const Tensor loss = sft_loss(batch, params, config);
  numkit::backward(loss);
  optimizer.step(params, lr);
  return loss.item();
}

TokenAccuracy teacher_forced_accuracy(std::span<const Example> examples,
                                      const numkit::ParameterSet& params,
                                      const model::ModelConfig& config) {
  const numkit::ParameterSet frozen = params.detached();
  TokenAccuracy acc;
  for (const auto& e : examples) {
    const Tensor logits = teacher_forced_logits(e, frozen, config);
    for (std::size_t t = 0; t < e.target.size(); ++t) {
      const auto row = logits.value().row(t);
      const auto best = std::max_element(row.begin(), row.end()) - row.begin();
      if (best == e.target[t]) ++acc.correct;
      ++acc.total;
    }
  }
  return acc;
}

}  // namespace rrg::train
