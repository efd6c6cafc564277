#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "rrg/model/config.hpp"
#include "rrg/model/network.hpp"
#include "rrg/model/study.hpp"
#include "rrg/model/tokenizer.hpp"
#include "rrg/numkit/parameter.hpp"

namespace rrg::model {

enum class SourceId : int {
  indication = 0,
  history,
  comparison,
  technique,
  generated_findings,
  generated_impression,
  prior_findings,
  prior_impression,
  study_images,
  prior_images,
};

inline constexpr std::size_t kSourceCount = 10;

std::string_view to_string(SourceId s);

/// One prompt position: either a token or row `image_row` of the compressed
/// features of image `image_index`.
struct PromptPosition {
  int token = -1;  // -1 for image rows
  std::size_t image_index = 0;
  std::size_t image_row = 0;
  SourceId source = SourceId::indication;
  double delta_seconds = 0.0;
  int position_id = 0;

  bool is_image() const { return token < 0; }
};

/// Ordered multimodal input. Image rows refer to raw patch features; the
/// adapter runs when the bundle is embedded so it can be trained.
struct PromptBundle {
  std::vector<PromptPosition> positions;
  std::vector<numkit::Array> image_features;  // [n_p x d_v] per image

  std::size_t length() const { return positions.size(); }
  std::vector<int> position_ids() const;
};

/// Uniform sample without replacement of `limit` items, original order kept.
/// Unchanged when there are at most `limit` items.
std::vector<StudyImage> image_subsample(const std::vector<StudyImage>& images,
                                        std::size_t limit, std::uint64_t seed);

struct AssembleOptions {
  std::size_t image_limit = 5;  // per timepoint
  std::uint64_t seed = 0;       // image subsampling
};

/// Prior inputs first, then study inputs. Within a timepoint the text
/// sections come first (indication, history, comparison, technique; a prior
/// contributes findings and impression), then the images with laterals before
/// frontals. Position ids follow this order. Prior positions carry the
/// study-prior interval as their time delta; study positions carry 0.
PromptBundle assemble_prompt(const StudyRecord& study, const Vocabulary& vocab,
                             const PatchEncoder& encoder, const ModelConfig& config,
                             const AssembleOptions& options = {});

/// [L x d_model] content + source + time-delta embeddings, in storage order.
numkit::Tensor embed_prompt(const PromptBundle& bundle, const numkit::ParameterSet& params,
                            const ModelConfig& config);

}  // namespace rrg::model
