#include "rrg/model/prompt.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>

#include "rrg/numkit/ops.hpp"

namespace rrg::model {

using numkit::Array;
using numkit::Shape;
using numkit::Tensor;

std::string_view to_string(SourceId s) {
  switch (s) {
    case SourceId::indication: return "indication";
    case SourceId::history: return "history";
    case SourceId::comparison: return "comparison";
    case SourceId::technique: return "technique";
    case SourceId::generated_findings: return "generated_findings";
    case SourceId::generated_impression: return "generated_impression";
    case SourceId::prior_findings: return "prior_findings";
    case SourceId::prior_impression: return "prior_impression";
    case SourceId::study_images: return "study_images";
    case SourceId::prior_images: return "prior_images";
  }
  return "?";
}

std::vector<int> PromptBundle::position_ids() const {
  std::vector<int> ids;
  ids.reserve(positions.size());
  for (const auto& p : positions) ids.push_back(p.position_id);
  return ids;
}

std::vector<StudyImage> image_subsample(const std::vector<StudyImage>& images,
                                        std::size_t limit, std::uint64_t seed) {
  if (limit == 0) throw std::invalid_argument("image_subsample: limit must be >= 1");
  if (images.size() <= limit) return images;
  std::mt19937_64 rng(seed);
  std::vector<StudyImage> out;
  out.reserve(limit);
  std::sample(images.begin(), images.end(), std::back_inserter(out), limit, rng);
  return out;
}

namespace {

struct Builder {
  PromptBundle bundle;
  const Vocabulary& vocab;
  const PatchEncoder& encoder;
  std::size_t query_count;

  void text(const std::optional<std::string>& section, SourceId source, double delta) {
    if (!section) return;
    for (int id : vocab.encode(*section)) {
      PromptPosition p;
      p.token = id;
      p.source = source;
      p.delta_seconds = delta;
      push(p);
    }
  }

  void images(const std::vector<StudyImage>& imgs, SourceId source, double delta) {
    // laterals first so the frontal view sits nearest the generated tokens
    for (View view : {View::lateral, View::frontal}) {
      for (const auto& img : imgs) {
        if (img.view != view) continue;
        const std::size_t index = bundle.image_features.size();
        bundle.image_features.push_back(encoder.encode(img.pixels));
        for (std::size_t r = 0; r < query_count; ++r) {
          PromptPosition p;
          p.image_index = index;
          p.image_row = r;
          p.source = source;
          p.delta_seconds = delta;
          push(p);
        }
      }
    }
  }

  void push(PromptPosition p) {
    p.position_id = static_cast<int>(bundle.positions.size());
    bundle.positions.push_back(p);
  }
};

}  // namespace

PromptBundle assemble_prompt(const StudyRecord& study, const Vocabulary& vocab,
                             const PatchEncoder& encoder, const ModelConfig& config,
                             const AssembleOptions& options) {
  Builder b{{}, vocab, encoder, config.query_count};
  if (study.prior) {
    const StudyRecord& prior = *study.prior;
    if (prior.timestamp >= study.timestamp) {
      throw std::invalid_argument("assemble_prompt: prior " + prior.study_id +
                                  " is not earlier than study " + study.study_id);
    }
    const double delta = static_cast<double>(study.timestamp - prior.timestamp);
    b.text(prior.sections.get(Section::findings), SourceId::prior_findings, delta);
    b.text(prior.sections.get(Section::impression), SourceId::prior_impression, delta);
    b.images(image_subsample(prior.images, options.image_limit, options.seed + 1),
             SourceId::prior_images, delta);
  }
  b.text(study.sections.get(Section::indication), SourceId::indication, 0.0);
  b.text(study.sections.get(Section::history), SourceId::history, 0.0);
  b.text(study.sections.get(Section::comparison), SourceId::comparison, 0.0);
  b.text(study.sections.get(Section::technique), SourceId::technique, 0.0);
  b.images(image_subsample(study.images, options.image_limit, options.seed),
           SourceId::study_images, 0.0);
  return std::move(b.bundle);
}

Tensor embed_prompt(const PromptBundle& bundle, const numkit::ParameterSet& params,
                    const ModelConfig& config) {
  const std::size_t L = bundle.length();
  if (L == 0) throw std::invalid_argument("embed_prompt: empty prompt");

  // Content rows: all token rows first, then all adapter rows; `order` maps
  // each storage position to its content row.
  std::vector<int> token_ids;
  std::vector<std::size_t> image_used(bundle.image_features.size(), 0);
  for (const auto& p : bundle.positions) {
    if (p.is_image()) {
      if (p.image_index >= bundle.image_features.size() || p.image_row >= config.query_count) {
        throw std::out_of_range("embed_prompt: image position out of range");
      }
      image_used[p.image_index] = 1;
    } else {
      token_ids.push_back(p.token);
    }
  }
  std::vector<Tensor> parts;
  if (!token_ids.empty()) {
    for (int id : token_ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
        throw std::out_of_range("embed_prompt: token id " + std::to_string(id) +
                                " outside vocabulary");
      }
    }
    parts.push_back(numkit::gather_rows(params.get("decoder.token_embedding"), token_ids));
  }
  std::vector<std::size_t> image_base(bundle.image_features.size(), 0);
  std::size_t next = token_ids.size();
  for (std::size_t i = 0; i < bundle.image_features.size(); ++i) {
    if (!image_used[i]) continue;
    parts.push_back(
        qadapter_forward(Tensor::constant(bundle.image_features[i]), params, config));
    image_base[i] = next;
    next += config.query_count;
  }
  const Tensor table = parts.size() == 1 ? parts.front() : numkit::concat(parts, 0);

  std::vector<int> order(L), sources(L);
  Array features(Shape{L, 1}, 0.0);
  std::size_t token_cursor = 0;
  for (std::size_t i = 0; i < L; ++i) {
    const auto& p = bundle.positions[i];
    order[i] = static_cast<int>(p.is_image() ? image_base[p.image_index] + p.image_row
                                             : token_cursor++);
    sources[i] = static_cast<int>(p.source);
    features.data()[i] = time_delta_feature(p.delta_seconds);
  }
  const Tensor content = numkit::gather_rows(table, order);
  const Tensor source = numkit::gather_rows(params.get("decoder.source_embedding"), sources);
  const Tensor delta = numkit::matmul(
      numkit::gelu(numkit::matmul(Tensor::constant(std::move(features)),
                                  params.get("time_delta.w1"))),
      params.get("time_delta.w2"));
  return numkit::add(numkit::add(content, source), delta);
}

}  // namespace rrg::model
