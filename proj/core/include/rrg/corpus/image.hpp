#pragma once

#include <filesystem>
#include <random>
#include <stdexcept>
#include <vector>

#include "rrg/corpus/catalogue.hpp"
#include "rrg/model/study.hpp"

namespace rrg::corpus {

class ZeroDynamicRange : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Min-max scaling in single precision, truncation to 8 bits, then histogram
/// equalisation: v -> round((cdf(v) - cdf_min) / (N - cdf_min) * 255) with
/// cdf_min the count of the darkest occupied level and ties to even.
/// Output values are integers in [0, 255].
model::GrayImage normalise_image(const model::GrayImage& image);

/// Raw 8-bit synthetic radiograph: a fixed body template with noise plus one
/// motif per planted finding. Moderate findings fill their whole cell, mild
/// ones the upper half. Lateral views are mirrored left-right.
model::GrayImage render_image(const std::vector<PlantedFinding>& findings, model::View view,
                              std::size_t size, std::mt19937_64& rng);

/// Binary portable graymap (P5, maxval 255). Values are rounded and clamped.
void write_pgm(const std::filesystem::path& path, const model::GrayImage& image);
model::GrayImage read_pgm(const std::filesystem::path& path);

}  // namespace rrg::corpus
