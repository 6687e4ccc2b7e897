#pragma once

#include <utility>

#include "metadapt/data_adapter.hpp"
#include "metadapt/grad_check.hpp"
#include "metadapt/model.hpp"
#include "metadapt/ops.hpp"

namespace metadapt {

// DifferentiableMap views of the shipped primitives and composites, so the
// finite-difference verifier can exercise each analytic gradient path.

/// params {"w" [m x n], "b" [m]}, input x [n] -> Wx + b.
class AffineMap final : public DifferentiableMap {
 public:
  Tensor forward(const ParamSet& params, const Tensor& input) const override {
    return affine(params.at("w"), params.at("b"), input);
  }
  std::pair<ParamSet, Tensor> backward(const ParamSet& params, const Tensor& input,
                                       const Tensor& upstream) const override {
    auto g = affine_backward(params.at("w"), input, upstream);
    ParamSet grads;
    grads.add("w", std::move(g.w_grad));
    grads.add("b", std::move(g.b_grad));
    return {std::move(grads), std::move(g.x_grad)};
  }
};

/// Prototype-gated scores: adapter gate_scores as a map over psi.
class GatingMap final : public DifferentiableMap {
 public:
  explicit GatingMap(const DataAdapter& adapter) : adapter_(adapter) {}

  Tensor forward(const ParamSet& psi, const Tensor& input) const override {
    return adapter_.gate_scores(psi, input);
  }
  std::pair<ParamSet, Tensor> backward(const ParamSet& psi, const Tensor& input,
                                       const Tensor& upstream) const override {
    // Gate scores appear inside adapt_feature as multipliers of the head
    // outputs; isolate their gradient by differentiating the scores alone.
    const Tensor& protos = psi.at("feat_proto");
    const std::size_t n = upstream.numel();
    const std::size_t d = input.numel();
    Tensor scores = adapter_.gate_scores(psi, input);
    Tensor logit_grads = softmax_temp_backward(scores, adapter_.config().temperature, upstream);
    ParamSet grads = ParamSet::zeros_like(psi);
    Tensor input_grad = Tensor::zeros_like(input);
    Tensor& gproto = grads.at("feat_proto");
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(protos.data() + i * d, protos.data() + (i + 1) * d);
      auto cg = cosine_similarity_backward(Tensor::vector(std::move(row)), input, logit_grads[i]);
      for (std::size_t c = 0; c < d; ++c) {
        gproto.data()[i * d + c] += cg.a_grad[c];
        input_grad[c] += cg.b_grad[c];
      }
    }
    return {std::move(grads), std::move(input_grad)};
  }

 private:
  const DataAdapter& adapter_;
};

/// Full feature adaptation x -> x_tilde over psi.
class FeatureAdaptMap final : public DifferentiableMap {
 public:
  explicit FeatureAdaptMap(const DataAdapter& adapter) : adapter_(adapter) {}

  Tensor forward(const ParamSet& psi, const Tensor& input) const override {
    return adapter_.adapt_feature(psi, input);
  }
  std::pair<ParamSet, Tensor> backward(const ParamSet& psi, const Tensor& input,
                                       const Tensor& upstream) const override {
    ParamSet grads = ParamSet::zeros_like(psi);
    Tensor input_grad = Tensor::zeros_like(input);
    adapter_.adapt_feature_backward(psi, input, upstream, grads, &input_grad);
    return {std::move(grads), std::move(input_grad)};
  }

 private:
  const DataAdapter& adapter_;
};

/// Label adaptation over psi; the input packs [gate_input..., y].
class LabelAdaptMap final : public DifferentiableMap {
 public:
  explicit LabelAdaptMap(const DataAdapter& adapter) : adapter_(adapter) {}

  Tensor forward(const ParamSet& psi, const Tensor& input) const override {
    auto [gate_input, y] = unpack(input);
    return Tensor::scalar(adapter_.adapt_label(psi, gate_input, y));
  }
  std::pair<ParamSet, Tensor> backward(const ParamSet& psi, const Tensor& input,
                                       const Tensor& upstream) const override {
    auto [gate_input, y] = unpack(input);
    ParamSet grads = ParamSet::zeros_like(psi);
    Tensor gate_grad = Tensor::zeros_like(gate_input);
    adapter_.adapt_label_backward(psi, gate_input, y, upstream[0], grads, &gate_grad);
    Tensor input_grad = Tensor::zeros_like(input);
    for (std::size_t i = 0; i < gate_grad.numel(); ++i) input_grad[i] = gate_grad[i];
    // d(adapted)/dy = sum_i s'_i * gamma_i
    Tensor gates = adapter_.label_gate_scores(psi, gate_input);
    const Tensor& scale = psi.at("label_scale");
    double dy = 0.0;
    for (std::size_t i = 0; i < gates.numel(); ++i) dy += gates[i] * scale[i];
    input_grad[input.numel() - 1] = upstream[0] * dy;
    return {std::move(grads), std::move(input_grad)};
  }

 private:
  static std::pair<Tensor, double> unpack(const Tensor& input) {
    std::vector<double> gate(input.values().begin(), input.values().end() - 1);
    return {Tensor::vector(std::move(gate)), input[input.numel() - 1]};
  }
  const DataAdapter& adapter_;
};

/// The full online inference path over psi with theta frozen, one row per
/// sample: X -> H_inv(x_s, F(G(x_s); theta)).
class InvertCompositeMap final : public DifferentiableMap {
 public:
  InvertCompositeMap(const DataAdapter& adapter, const ForecastModel& model, ParamSet theta)
      : adapter_(adapter), model_(model), theta_(std::move(theta)) {}

  Tensor forward(const ParamSet& psi, const Tensor& input) const override {
    const std::size_t rows = input.dim(0), d = input.dim(1);
    Tensor adapted = Tensor::zeros({rows, d});
    for (std::size_t s = 0; s < rows; ++s) {
      Tensor x = row_of(input, s);
      Tensor a = adapter_.adapt_feature(psi, x);
      std::copy(a.data(), a.data() + d, adapted.data() + s * d);
    }
    Tensor intermediate = model_.predict(theta_, adapted);
    Tensor out = Tensor::zeros({rows});
    for (std::size_t s = 0; s < rows; ++s) {
      out[s] = adapter_.invert_prediction(psi, row_of(input, s), intermediate[s]);
    }
    return out;
  }

  std::pair<ParamSet, Tensor> backward(const ParamSet& psi, const Tensor& input,
                                       const Tensor& upstream) const override {
    const std::size_t rows = input.dim(0), d = input.dim(1);
    Tensor adapted = Tensor::zeros({rows, d});
    for (std::size_t s = 0; s < rows; ++s) {
      Tensor x = row_of(input, s);
      Tensor a = adapter_.adapt_feature(psi, x);
      std::copy(a.data(), a.data() + d, adapted.data() + s * d);
    }
    Tensor intermediate = model_.predict(theta_, adapted);

    ParamSet grads = ParamSet::zeros_like(psi);
    Tensor input_grad = Tensor::zeros_like(input);
    Tensor d_intermediate = Tensor::zeros({rows});
    for (std::size_t s = 0; s < rows; ++s) {
      Tensor gate_grad = Tensor::zeros({d});
      double dmid = 0.0;
      adapter_.invert_prediction_backward(psi, row_of(input, s), intermediate[s], upstream[s],
                                          grads, &dmid, &gate_grad);
      d_intermediate[s] = dmid;
      for (std::size_t c = 0; c < d; ++c) input_grad.data()[s * d + c] += gate_grad[c];
    }
    auto [model_grads, d_adapted] = model_.backward(theta_, adapted, d_intermediate);
    (void)model_grads;
    for (std::size_t s = 0; s < rows; ++s) {
      Tensor up = row_of(d_adapted, s);
      Tensor dx = Tensor::zeros({d});
      adapter_.adapt_feature_backward(psi, row_of(input, s), up, grads, &dx);
      for (std::size_t c = 0; c < d; ++c) input_grad.data()[s * d + c] += dx[c];
    }
    return {std::move(grads), std::move(input_grad)};
  }

 private:
  static Tensor row_of(const Tensor& batch, std::size_t s) {
    std::size_t d = batch.dim(1);
    return Tensor::vector(std::vector<double>(batch.data() + s * d, batch.data() + (s + 1) * d));
  }
  const DataAdapter& adapter_;
  const ForecastModel& model_;
  ParamSet theta_;
};

/// A forecast model as a map over its own parameters for one input batch.
class ModelBatchMap final : public DifferentiableMap {
 public:
  explicit ModelBatchMap(const ForecastModel& model) : model_(model) {}

  Tensor forward(const ParamSet& params, const Tensor& input) const override {
    return model_.forward(params, input);
  }
  std::pair<ParamSet, Tensor> backward(const ParamSet& params, const Tensor& input,
                                       const Tensor& upstream) const override {
    return model_.backward(params, input, upstream);
  }

 private:
  const ForecastModel& model_;
};

}  // namespace metadapt
