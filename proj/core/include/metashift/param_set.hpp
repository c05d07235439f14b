#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "metashift/tensor.hpp"

namespace metashift::ad {

/// Ordered name -> Tensor map. Iteration follows insertion order, so walks
/// over a ParamSet are deterministic.
class ParamSet {
 public:
  ParamSet() = default;

  void insert(const std::string& name, Tensor t);
  /// Replaces the tensor of an existing entry.
  void set(const std::string& name, Tensor t);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  std::size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor& tensor(std::size_t i) const { return tensors_[i]; }

  /// Total number of scalar coordinates.
  std::size_t coordinate_count() const;
  /// Entries whose name starts with `prefix`, preserving order.
  std::vector<std::string> names_with_prefix(const std::string& prefix) const;
  /// Same entries, detached from any tape.
  ParamSet detached() const;
  bool all_finite() const;
  bool same_values(const ParamSet& other) const;
  double max_abs_diff(const ParamSet& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// JSON document mapping name -> {shape, values}. Doubles are written as
/// shortest round-trip decimals, so load(save(p)) is value-exact.
std::string save_param_set(const ParamSet& p);
ParamSet load_param_set(const std::string& json_text);

}  // namespace metashift::ad
