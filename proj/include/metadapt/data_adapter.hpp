#pragma once

#include <cstdint>
#include <string>

#include "metadapt/param_set.hpp"
#include "metadapt/tensor.hpp"

namespace metadapt {

enum class LabelGateMode { Separate, Shared };
enum class FeatureLayout { Flat, Timeseries };

struct DataAdapterConfig {
  std::size_t head_count = 8;  // N
  double temperature = 10.0;   // softmax temperature
  double gamma_min = 1e-3;     // invertibility guard on label scales
  LabelGateMode label_gate = LabelGateMode::Separate;
  FeatureLayout layout = FeatureLayout::Flat;
  std::size_t step_dim = 0;        // per-step width d when layout is Timeseries
  std::size_t label_gate_dim = 16; // projection output width
};

/// Two-sided data adapter: a multi-head residual feature map, a multi-head
/// affine label map, and the label map's inverse applied to predictions.
/// Head selection is prototype-gated through a temperature softmax; the
/// label side gates through a learned low-dimensional projection (or reuses
/// the feature gates when configured as Shared).
///
/// Parameters live in one ParamSet:
///   feat_w{i} [d x d], feat_b{i} [d], feat_proto [N x d],
///   label_scale [N], label_shift [N],
///   label_proj [v x D], label_proto [N x v]   (Separate gate only)
///
/// At identity initialization (zero heads, unit scales) the adapter is the
/// identity on features, labels, and predictions.
class DataAdapter {
 public:
  explicit DataAdapter(DataAdapterConfig config);

  const DataAdapterConfig& config() const { return config_; }

  ParamSet init(std::uint64_t seed, std::size_t feature_dim) const;

  /// Prototype-gated head scores for one step vector; sums to 1.
  Tensor gate_scores(const ParamSet& psi, const Tensor& step) const;

  /// Residual multi-head transform; per-step in Timeseries layout.
  Tensor adapt_feature(const ParamSet& psi, const Tensor& x) const;

  /// Gate vector used by the label heads for a given gate input.
  Tensor label_gate_scores(const ParamSet& psi, const Tensor& gate_input) const;

  double adapt_label(const ParamSet& psi, const Tensor& gate_input, double y) const;

  double invert_prediction(const ParamSet& psi, const Tensor& gate_input, double intermediate) const;

  // -- reverse mode -------------------------------------------------------
  // Each backward accumulates parameter gradients into `grads` (shaped like
  // psi) and optionally propagates into the map's input.

  void adapt_feature_backward(const ParamSet& psi, const Tensor& x, const Tensor& upstream,
                              ParamSet& grads, Tensor* input_grad) const;

  void adapt_label_backward(const ParamSet& psi, const Tensor& gate_input, double y,
                            double upstream, ParamSet& grads, Tensor* gate_input_grad) const;

  void invert_prediction_backward(const ParamSet& psi, const Tensor& gate_input,
                                  double intermediate, double upstream, ParamSet& grads,
                                  double* intermediate_grad, Tensor* gate_input_grad) const;

  /// Re-projects every label scale to sign(g) * max(|g|, gamma_min).
  /// Applied after every optimizer step on psi.
  void project_gamma(ParamSet& psi) const;

  /// True for entries of the feature side (heads + prototypes).
  static bool is_feature_entry(const std::string& name);
  /// True for the label heads {gamma, beta} only.
  static bool is_label_head_entry(const std::string& name);

  std::size_t steps(std::size_t feature_dim) const;
  std::size_t width(std::size_t feature_dim) const;

 private:
  void check_gamma(const Tensor& scales) const;
  Tensor label_gate_logits(const ParamSet& psi, const Tensor& gate_input, Tensor* projected) const;
  void label_gate_backward(const ParamSet& psi, const Tensor& gate_input, const Tensor& scores,
                           const Tensor& score_grads, ParamSet& grads, Tensor* gate_input_grad) const;

  DataAdapterConfig config_;
};

}  // namespace metadapt
