#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "metadapt/tensor.hpp"

namespace metadapt {

/// Ordered, named collection of tensors. Holds the parameters of every
/// differentiable component (forecast model weights, adapter weights) and
/// doubles as the gradient container, so optimizer updates are uniform.
///
/// Names are unique; iteration follows insertion order, which keeps every
/// downstream reduction order-stable and runs reproducible.
class ParamSet {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(std::string name, Tensor value);
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t total_coordinates() const;

  std::vector<Entry>::iterator begin() { return entries_.begin(); }
  std::vector<Entry>::iterator end() { return entries_.end(); }
  std::vector<Entry>::const_iterator begin() const { return entries_.begin(); }
  std::vector<Entry>::const_iterator end() const { return entries_.end(); }

  /// Deep, independent copy (value semantics make this a plain copy).
  ParamSet clone() const { return *this; }

  /// Same names, same shapes, same order.
  bool compatible_with(const ParamSet& other) const;

  /// this += alpha * other. Throws DimensionError on name/shape mismatch.
  void axpy(double alpha, const ParamSet& other);
  void scale(double factor);
  void fill(double value);

  static ParamSet zeros_like(const ParamSet& other);

  /// Throws DimensionError naming the first mismatch.
  static void require_compatible(const ParamSet& a, const ParamSet& b, const char* context);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace metadapt
