#pragma once

// Small models and studies shared by the unit and acceptance tests.

#include <memory>
#include <random>
#include <string>

#include "rrg/model/config.hpp"
#include "rrg/model/study.hpp"
#include "rrg/model/tokenizer.hpp"

namespace rrg::testing {

/// d_model 32, two decoder layers, one adapter layer.
inline model::ModelConfig tiny_config(std::size_t vocab_size) {
  model::ModelConfig c;
  c.vocab_size = vocab_size;
  c.d_model = 32;
  c.decoder_layers = 2;
  c.heads = 4;
  c.ff_dim = 64;
  c.image_size = 64;
  c.patch_count = 16;
  c.patch_dim = 32;
  c.query_count = 4;
  c.adapter_layers = 1;
  c.adapter_heads = 2;
  c.adapter_ff_dim = 48;
  c.time_delta_inner = 16;
  c.max_generated_tokens = 24;
  return c;
}

inline model::GrayImage noise_image(std::size_t side, std::mt19937_64& rng) {
  model::GrayImage img(side, side);
  std::uniform_int_distribution<int> px(0, 255);
  for (double& v : img.pixels) v = px(rng);
  return img;
}

inline model::Vocabulary tiny_vocabulary() {
  const std::string texts[] = {
      "cough . fever . chest pain . follow up . pa and lateral views . single view .",
      "the lungs are clear . small left effusion . heart size is enlarged . new . unchanged .",
      "no acute process . cardiomegaly . effusion . pneumonia ."};
  return model::Vocabulary::build(texts);
}

/// Study with a frontal and a lateral image and, optionally, a one-day-old
/// prior with a single frontal image.
inline model::StudyRecord tiny_study(std::mt19937_64& rng, bool with_prior) {
  model::StudyRecord s;
  s.study_id = "s1";
  s.patient_id = "p1";
  s.timestamp = 1'700'000'000;
  s.images.push_back({noise_image(64, rng), model::View::frontal, ""});
  s.images.push_back({noise_image(64, rng), model::View::lateral, ""});
  s.sections.get(model::Section::indication) = "cough .";
  s.sections.get(model::Section::technique) = "pa and lateral views .";
  s.sections.get(model::Section::findings) = "small left effusion .";
  s.sections.get(model::Section::impression) = "effusion .";
  if (with_prior) {
    auto prior = std::make_shared<model::StudyRecord>();
    prior->study_id = "s0";
    prior->patient_id = "p1";
    prior->timestamp = s.timestamp - 86'400;
    prior->images.push_back({noise_image(64, rng), model::View::frontal, ""});
    prior->sections.get(model::Section::findings) = "the lungs are clear .";
    prior->sections.get(model::Section::impression) = "no acute process .";
    s.prior = prior;
  }
  return s;
}

}  // namespace rrg::testing
