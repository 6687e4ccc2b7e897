#include "metadapt/param_set.hpp"

#include "metadapt/errors.hpp"

namespace metadapt {

void ParamSet::add(std::string name, Tensor value) {
  if (index_.count(name)) {
    throw DimensionError("duplicate parameter name '" + name + "'");
  }
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(value));
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw DimensionError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DimensionError("unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

std::size_t ParamSet::total_coordinates() const {
  std::size_t n = 0;
  for (const auto& [name, tensor] : entries_) n += tensor.numel();
  return n;
}

bool ParamSet::compatible_with(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first) return false;
    if (!entries_[i].second.same_shape(other.entries_[i].second)) return false;
  }
  return true;
}

void ParamSet::axpy(double alpha, const ParamSet& other) {
  require_compatible(*this, other, "axpy");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& dst = entries_[i].second.values();
    const auto& src = other.entries_[i].second.values();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += alpha * src[j];
  }
}

void ParamSet::scale(double factor) {
  for (auto& [name, tensor] : entries_) {
    for (double& v : tensor.values()) v *= factor;
  }
}

void ParamSet::fill(double value) {
  for (auto& [name, tensor] : entries_) {
    for (double& v : tensor.values()) v = value;
  }
}

ParamSet ParamSet::zeros_like(const ParamSet& other) {
  ParamSet out;
  for (const auto& [name, tensor] : other) {
    out.add(name, Tensor::zeros_like(tensor));
  }
  return out;
}

void ParamSet::require_compatible(const ParamSet& a, const ParamSet& b, const char* context) {
  if (a.entries_.size() != b.entries_.size()) {
    throw DimensionError(std::string(context) + ": parameter sets have " +
                         std::to_string(a.entries_.size()) + " vs " +
                         std::to_string(b.entries_.size()) + " entries");
  }
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    if (a.entries_[i].first != b.entries_[i].first) {
      throw DimensionError(std::string(context) + ": parameter name mismatch '" +
                           a.entries_[i].first + "' vs '" + b.entries_[i].first + "'");
    }
    if (!a.entries_[i].second.same_shape(b.entries_[i].second)) {
      throw DimensionError(std::string(context) + ": shape mismatch for '" + a.entries_[i].first +
                           "' " + a.entries_[i].second.shape_str() + " vs " +
                           b.entries_[i].second.shape_str());
    }
  }
}

}  // namespace metadapt
