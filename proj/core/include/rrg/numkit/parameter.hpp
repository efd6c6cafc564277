#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "rrg/numkit/tensor.hpp"

namespace rrg::numkit {

struct Parameter {
  std::string name;
  Tensor tensor;  // leaf; requires_grad is set unless the set is detached
  bool frozen = false;
};

/// Named trainable arrays of one model, in insertion order.
class ParameterSet {
 public:
  /// Adds a parameter; names must be unique.
  Tensor& add(std::string name, Array value, bool frozen = false);

  bool contains(const std::string& name) const { return index_.contains(name); }
  const Tensor& get(const std::string& name) const;
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::vector<Parameter>& items() { return params_; }
  const std::vector<Parameter>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;

  void zero_grad();
  /// Deep copy with fresh leaves; gradients are not copied.
  ParameterSet clone() const;
  /// Copy whose leaves do not require gradients (no graph is recorded).
  ParameterSet detached() const;
  /// View sharing the leaves selected by `predicate` (their gradients land
  /// here); every other parameter is a constant copy that records no graph.
  ParameterSet shared_where(const std::function<bool(const std::string&)>& predicate) const;
  /// Overwrites values from `other` (same names and shapes).
  void assign_values(const ParameterSet& other);

  void set_frozen_where(const std::function<bool(const std::string&)>& predicate, bool frozen);

  /// Bitwise comparison of names, shapes and values.
  bool bitwise_equal(const ParameterSet& other) const;

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

/// Binary snapshot container: "CXL2" magic, u32 format version, then per
/// parameter u64 name length, name bytes, u64 rank, u64 extents, f64 payload,
/// all little-endian.
inline constexpr std::uint32_t kSnapshotVersion = 1;

void write_snapshot(std::ostream& out, const ParameterSet& params);
void save_snapshot(const std::filesystem::path& path, const ParameterSet& params);
/// Reads every record. Loaded parameters require gradients and are not frozen.
ParameterSet read_snapshot(std::istream& in);
ParameterSet load_snapshot(const std::filesystem::path& path);

}  // namespace rrg::numkit
