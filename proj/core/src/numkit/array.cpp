#include "rrg/numkit/array.hpp"

#include <cmath>
#include <sstream>

namespace rrg::numkit {

std::size_t element_count(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Array::Array(Shape shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("array: " + std::to_string(data_.size()) +
                     " values do not fill shape " + shape_string(shape_));
  }
}

Array Array::scalar(double value) { return Array(Shape{}, std::vector<double>{value}); }

Array Array::vector(std::vector<double> values) {
  const auto n = values.size();
  return Array(Shape{n}, std::move(values));
}

Array Array::matrix(std::size_t rows, std::size_t cols,
                    std::initializer_list<double> values) {
  return Array(Shape{rows, cols}, std::vector<double>(values));
}

std::size_t Array::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("array: axis " + std::to_string(axis) + " out of range for " +
                     shape_string(shape_));
  }
  return shape_[axis];
}

std::size_t Array::rows() const {
  if (shape_.size() == 2) return shape_[0];
  if (shape_.size() <= 1) return 1;
  throw ShapeError("array: rows() needs rank <= 2, got " + shape_string(shape_));
}

std::size_t Array::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  if (shape_.empty()) return 1;
  throw ShapeError("array: cols() needs rank <= 2, got " + shape_string(shape_));
}

std::span<double> Array::row(std::size_t r) {
  const auto c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Array::row(std::size_t r) const {
  const auto c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

double Array::item() const {
  if (data_.size() != 1) {
    throw ShapeError("array: item() on " + shape_string(shape_));
  }
  return data_[0];
}

void Array::fill(double value) {
  for (auto& v : data_) v = value;
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_finite(const Array& a, std::string_view op) {
  if (!all_finite(a.data())) {
    throw NumericError(std::string(op) + ": non-finite value");
  }
}

}  // namespace rrg::numkit
