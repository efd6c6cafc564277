#include "rrg/numkit/parameter.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace rrg::numkit {

Tensor& ParameterSet::add(std::string name, Array value, bool frozen) {
  if (index_.contains(name)) {
    throw std::invalid_argument("parameter '" + name + "' already defined");
  }
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), Tensor::leaf(std::move(value), true), frozen});
  return params_.back().tensor;
}

const Tensor& ParameterSet::get(const std::string& name) const { return at(name).tensor; }

Parameter& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return params_[it->second];
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return params_[it->second];
}

std::size_t ParameterSet::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& p : params_) out.add(p.name, p.tensor.value(), p.frozen);
  return out;
}

ParameterSet ParameterSet::detached() const {
  ParameterSet out;
  for (const auto& p : params_) {
    out.index_.emplace(p.name, out.params_.size());
    out.params_.push_back(Parameter{p.name, Tensor::constant(p.tensor.value()), p.frozen});
  }
  return out;
}

ParameterSet ParameterSet::shared_where(
    const std::function<bool(const std::string&)>& predicate) const {
  ParameterSet out;
  for (const auto& p : params_) {
    out.index_.emplace(p.name, out.params_.size());
    Tensor t = predicate(p.name) ? p.tensor : Tensor::constant(p.tensor.value());
    out.params_.push_back(Parameter{p.name, std::move(t), p.frozen});
  }
  return out;
}

void ParameterSet::assign_values(const ParameterSet& other) {
  for (auto& p : params_) {
    const Tensor& src = other.get(p.name);
    if (!src.value().same_shape(p.tensor.value())) {
      throw ShapeError("assign_values: shape mismatch for '" + p.name + "'");
    }
    p.tensor.mutable_value() = src.value();
  }
}

void ParameterSet::set_frozen_where(const std::function<bool(const std::string&)>& predicate,
                                    bool frozen) {
  for (auto& p : params_) {
    if (predicate(p.name)) p.frozen = frozen;
  }
}

bool ParameterSet::bitwise_equal(const ParameterSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& a = params_[i];
    const auto& b = other.params_[i];
    if (a.name != b.name || a.tensor.shape() != b.tensor.shape()) return false;
    const auto av = a.tensor.value().data();
    const auto bv = b.tensor.value().data();
    if (std::memcmp(av.data(), bv.data(), av.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

namespace {

constexpr char kMagic[4] = {'C', 'X', 'L', '2'};

static_assert(std::endian::native == std::endian::little,
              "snapshot I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool get(std::istream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return static_cast<std::size_t>(in.gcount()) == sizeof(T);
}

}  // namespace

void write_snapshot(std::ostream& out, const ParameterSet& params) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kSnapshotVersion);
  for (const auto& p : params.items()) {
    put<std::uint64_t>(out, p.name.size());
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    const auto& shape = p.tensor.shape();
    put<std::uint64_t>(out, shape.size());
    for (auto e : shape) put<std::uint64_t>(out, e);
    const auto data = p.tensor.value().data();
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("snapshot: write failed");
}

void save_snapshot(const std::filesystem::path& path, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("snapshot: cannot open " + path.string());
  write_snapshot(out, params);
}

ParameterSet read_snapshot(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("snapshot: bad magic");
  }
  std::uint32_t version = 0;
  if (!get(in, version) || version != kSnapshotVersion) {
    throw std::runtime_error("snapshot: unsupported format version " + std::to_string(version));
  }
  ParameterSet params;
  while (in.peek() != std::char_traits<char>::eof()) {
    std::uint64_t name_len = 0, rank = 0;
    if (!get(in, name_len) || name_len > (1u << 20)) {
      throw std::runtime_error("snapshot: truncated record header");
    }
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!get(in, rank) || rank > 8) throw std::runtime_error("snapshot: bad rank for " + name);
    Shape shape(rank);
    for (auto& e : shape) {
      std::uint64_t v = 0;
      if (!get(in, v)) throw std::runtime_error("snapshot: truncated extents for " + name);
      e = v;
    }
    std::vector<double> values(element_count(shape));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != values.size() * sizeof(double)) {
      throw std::runtime_error("snapshot: truncated payload for " + name);
    }
    params.add(std::move(name), Array(std::move(shape), std::move(values)));
  }
  return params;
}

ParameterSet load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("snapshot: cannot open " + path.string());
  return read_snapshot(in);
}

}  // namespace rrg::numkit
