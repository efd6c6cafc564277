#include "rrg/corpus/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

namespace rrg::corpus {

using model::GrayImage;

model::GrayImage normalise_image(const GrayImage& image) {
  if (image.pixels.empty() || image.pixels.size() != image.height * image.width) {
    throw std::invalid_argument("normalise_image: expected a non-empty 2-D grid");
  }
  std::vector<float> px(image.pixels.begin(), image.pixels.end());
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  const float min_val = *lo;
  const float denom = *hi - *lo;
  if (denom == 0.0f) {
    std::ostringstream msg;
    msg << "Cannot normalise image with zero dynamic range (min=max=" << min_val << ").";
    throw ZeroDynamicRange(msg.str());
  }
  std::array<std::uint32_t, 256> hist{};
  std::vector<std::uint8_t> q(px.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const float scaled = (px[i] - min_val) / denom * 255.0f;
    q[i] = static_cast<std::uint8_t>(scaled);  // truncation, as an 8-bit cast
    ++hist[q[i]];
  }

  // equalisation with the darkest occupied level pinned to 0
  std::size_t first = 0;
  while (hist[first] == 0) ++first;
  const std::uint32_t total = static_cast<std::uint32_t>(q.size());
  std::array<std::uint8_t, 256> lut{};
  if (hist[first] == total) {
    lut.fill(static_cast<std::uint8_t>(first));
  } else {
    const float scale = 255.0f / static_cast<float>(total - hist[first]);
    std::uint32_t sum = 0;
    lut[first] = 0;
    for (std::size_t i = first + 1; i < 256; ++i) {
      sum += hist[i];
      const long v = std::lrint(static_cast<float>(sum) * scale);
      lut[i] = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
    }
  }
  GrayImage out(image.height, image.width);
  for (std::size_t i = 0; i < q.size(); ++i) out.pixels[i] = lut[q[i]];
  return out;
}

namespace {

bool pattern_hit(Pattern p, std::size_t r, std::size_t c, std::size_t cell) {
  const double h = static_cast<double>(cell) / 2.0 - 0.5;
  const double dr = static_cast<double>(r) - h, dc = static_cast<double>(c) - h;
  const double radius = std::sqrt(dr * dr + dc * dc);
  const double scale = static_cast<double>(cell) / 16.0;
  switch (p) {
    case Pattern::horizontal_stripes: return (r / std::max<std::size_t>(1, cell / 8)) % 2 == 0;
    case Pattern::vertical_stripes: return (c / std::max<std::size_t>(1, cell / 8)) % 2 == 0;
    case Pattern::disc: return radius <= 7.0 * scale;
    case Pattern::checker: return ((r / std::max<std::size_t>(1, cell / 4)) +
                                   (c / std::max<std::size_t>(1, cell / 4))) % 2 == 0;
    case Pattern::diagonal: return ((r + c) / std::max<std::size_t>(1, cell / 5)) % 2 == 0;
    case Pattern::solid: return true;
    case Pattern::ring: return radius >= 4.0 * scale && radius <= 7.0 * scale;
  }
  return false;
}

}  // namespace

GrayImage render_image(const std::vector<PlantedFinding>& findings, model::View view,
                       std::size_t size, std::mt19937_64& rng) {
  if (size % 4 != 0 || size == 0) {
    throw std::invalid_argument("render_image: size must be a positive multiple of 4");
  }
  const std::size_t cell = size / 4;
  const double s = static_cast<double>(size);
  std::uniform_int_distribution<int> noise(-6, 6);
  GrayImage img(size, size);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      // brighter towards the abdomen, darker lung fields either side of the midline
      double v = 70.0 + 50.0 * static_cast<double>(r) / s;
      for (double cx : {0.3, 0.7}) {
        const double dx = (static_cast<double>(c) / s - cx) / 0.17;
        const double dy = (static_cast<double>(r) / s - 0.45) / 0.32;
        if (dx * dx + dy * dy <= 1.0) v -= 35.0;
      }
      img.at(r, c) = v + noise(rng);
    }
  }
  for (const auto& f : findings) {
    const Motif m = motif(f.finding);
    const std::size_t rows = f.severity == Severity::moderate ? cell : cell / 2;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cell; ++c) {
        if (pattern_hit(m.pattern, r, c, cell)) img.at(m.cell_row * cell + r, m.cell_col * cell + c) += 90.0;
      }
    }
  }
  if (view == model::View::lateral) {
    for (std::size_t r = 0; r < size; ++r) {
      std::reverse(img.pixels.begin() + static_cast<std::ptrdiff_t>(r * size),
                   img.pixels.begin() + static_cast<std::ptrdiff_t>((r + 1) * size));
    }
  }
  for (double& v : img.pixels) v = std::clamp(std::round(v), 0.0, 255.0);
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<char> bytes(image.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp(std::round(image.pixels[i]), 0.0, 255.0);
    bytes[i] = static_cast<char>(static_cast<std::uint8_t>(v));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write_pgm: failed writing " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_pgm: cannot open " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0;
  int maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255 || w == 0 || h == 0) {
    throw std::runtime_error("read_pgm: " + path.string() + " is not an 8-bit P5 graymap");
  }
  in.get();  // single whitespace after the header
  std::vector<char> bytes(w * h);
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw std::runtime_error("read_pgm: " + path.string() + " is truncated");
  }
  GrayImage img(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(bytes[i]);
  }
  return img;
}

}  // namespace rrg::corpus
