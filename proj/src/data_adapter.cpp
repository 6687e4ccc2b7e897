#include "metadapt/data_adapter.hpp"

#include <cmath>

#include "metadapt/errors.hpp"
#include "metadapt/ops.hpp"
#include "metadapt/rng.hpp"

namespace metadapt {

namespace {

Tensor proto_row(const Tensor& protos, std::size_t i) {
  std::size_t d = protos.dim(1);
  std::vector<double> row(protos.data() + i * d, protos.data() + (i + 1) * d);
  return Tensor::vector(std::move(row));
}

Tensor uniform(std::mt19937_64& rng, std::vector<std::size_t> shape, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

}  // namespace

DataAdapter::DataAdapter(DataAdapterConfig config) : config_(config) {
  if (config_.head_count < 1) throw ConfigError("adapter: head count must be >= 1");
  if (config_.temperature <= 0.0) throw ConfigError("adapter: temperature must be positive");
  if (config_.gamma_min <= 0.0) throw ConfigError("adapter: gamma_min must be positive");
  if (config_.layout == FeatureLayout::Timeseries && config_.step_dim == 0) {
    throw ConfigError("adapter: timeseries layout requires step_dim > 0");
  }
  if (config_.label_gate == LabelGateMode::Shared && config_.layout == FeatureLayout::Timeseries) {
    throw ConfigError("adapter: shared label gating requires the flat layout");
  }
  if (config_.label_gate == LabelGateMode::Separate && config_.label_gate_dim == 0) {
    throw ConfigError("adapter: label_gate_dim must be positive");
  }
}

std::size_t DataAdapter::width(std::size_t feature_dim) const {
  if (config_.layout == FeatureLayout::Flat) return feature_dim;
  if (feature_dim % config_.step_dim != 0) {
    throw DimensionError("adapter: feature dim " + std::to_string(feature_dim) +
                         " is not a multiple of step_dim " + std::to_string(config_.step_dim));
  }
  return config_.step_dim;
}

std::size_t DataAdapter::steps(std::size_t feature_dim) const {
  return feature_dim / width(feature_dim);
}

ParamSet DataAdapter::init(std::uint64_t seed, std::size_t feature_dim) const {
  auto rng = substream(seed, "adapter_init");
  const std::size_t n = config_.head_count;
  const std::size_t d = width(feature_dim);

  // Heads start at zero and scales at one, so the adapter begins as the
  // identity and early meta-training cannot hurt the plain baseline.
  ParamSet psi;
  for (std::size_t i = 0; i < n; ++i) {
    psi.add("feat_w" + std::to_string(i), Tensor::zeros({d, d}));
    psi.add("feat_b" + std::to_string(i), Tensor::zeros({d}));
  }
  psi.add("feat_proto", uniform(rng, {n, d}, 0.1));
  Tensor scales = Tensor::zeros({n});
  for (std::size_t i = 0; i < n; ++i) scales[i] = 1.0;
  psi.add("label_scale", scales);
  psi.add("label_shift", Tensor::zeros({n}));
  if (config_.label_gate == LabelGateMode::Separate) {
    psi.add("label_proj", uniform(rng, {config_.label_gate_dim, feature_dim}, 0.1));
    psi.add("label_proto", uniform(rng, {n, config_.label_gate_dim}, 0.1));
  }
  return psi;
}

Tensor DataAdapter::gate_scores(const ParamSet& psi, const Tensor& step) const {
  const Tensor& protos = psi.at("feat_proto");
  if (step.numel() != protos.dim(1)) {
    throw DimensionError("gate_scores: step " + step.shape_str() + " vs prototypes " +
                         protos.shape_str());
  }
  const std::size_t n = config_.head_count;
  Tensor logits = Tensor::zeros({n});
  for (std::size_t i = 0; i < n; ++i) {
    logits[i] = cosine_similarity(proto_row(protos, i), step);
  }
  return softmax_temp(logits, config_.temperature);
}

Tensor DataAdapter::adapt_feature(const ParamSet& psi, const Tensor& x) const {
  const std::size_t d = width(x.numel());
  const std::size_t L = x.numel() / d;
  const std::size_t n = config_.head_count;
  if (psi.at("feat_w0").dim(1) != d) {
    throw DimensionError("adapt_feature: input " + x.shape_str() + " incompatible with heads " +
                         psi.at("feat_w0").shape_str());
  }
  Tensor out = x;
  std::vector<double> step(d);
  for (std::size_t j = 0; j < L; ++j) {
    std::copy(x.data() + j * d, x.data() + (j + 1) * d, step.begin());
    Tensor xs = Tensor::vector(step);
    Tensor gates = gate_scores(psi, xs);
    for (std::size_t i = 0; i < n; ++i) {
      Tensor head = affine(psi.at("feat_w" + std::to_string(i)),
                           psi.at("feat_b" + std::to_string(i)), xs);
      for (std::size_t c = 0; c < d; ++c) out[j * d + c] += gates[i] * head[c];
    }
  }
  return out;
}

Tensor DataAdapter::label_gate_logits(const ParamSet& psi, const Tensor& gate_input,
                                      Tensor* projected) const {
  const std::size_t n = config_.head_count;
  Tensor logits = Tensor::zeros({n});
  if (config_.label_gate == LabelGateMode::Shared) {
    const Tensor& protos = psi.at("feat_proto");
    for (std::size_t i = 0; i < n; ++i) {
      logits[i] = cosine_similarity(proto_row(protos, i), gate_input);
    }
    return logits;
  }
  const Tensor& proj = psi.at("label_proj");
  if (gate_input.numel() != proj.dim(1)) {
    throw DimensionError("label gate: input " + gate_input.shape_str() + " vs projection " +
                         proj.shape_str());
  }
  Tensor v = Tensor::zeros({proj.dim(0)});
  for (std::size_t r = 0; r < proj.dim(0); ++r) {
    double acc = 0.0;
    const double* row = proj.data() + r * proj.dim(1);
    for (std::size_t c = 0; c < proj.dim(1); ++c) acc += row[c] * gate_input[c];
    v[r] = acc;
  }
  const Tensor& protos = psi.at("label_proto");
  for (std::size_t i = 0; i < n; ++i) {
    logits[i] = cosine_similarity(proto_row(protos, i), v);
  }
  if (projected) *projected = std::move(v);
  return logits;
}

Tensor DataAdapter::label_gate_scores(const ParamSet& psi, const Tensor& gate_input) const {
  return softmax_temp(label_gate_logits(psi, gate_input, nullptr), config_.temperature);
}

double DataAdapter::adapt_label(const ParamSet& psi, const Tensor& gate_input, double y) const {
  const Tensor& scale = psi.at("label_scale");
  const Tensor& shift = psi.at("label_shift");
  Tensor gates = label_gate_scores(psi, gate_input);
  double out = 0.0;
  for (std::size_t i = 0; i < config_.head_count; ++i) {
    out += gates[i] * (scale[i] * y + shift[i]);
  }
  return out;
}

void DataAdapter::check_gamma(const Tensor& scales) const {
  for (std::size_t i = 0; i < scales.numel(); ++i) {
    if (std::abs(scales[i]) < config_.gamma_min) {
      throw ConfigError("label head scale " + std::to_string(scales[i]) +
                        " below the invertibility guard " + std::to_string(config_.gamma_min));
    }
  }
}

double DataAdapter::invert_prediction(const ParamSet& psi, const Tensor& gate_input,
                                      double intermediate) const {
  const Tensor& scale = psi.at("label_scale");
  const Tensor& shift = psi.at("label_shift");
  check_gamma(scale);
  Tensor gates = label_gate_scores(psi, gate_input);
  double out = 0.0;
  for (std::size_t i = 0; i < config_.head_count; ++i) {
    out += gates[i] * (intermediate - shift[i]) / scale[i];
  }
  return out;
}

void DataAdapter::adapt_feature_backward(const ParamSet& psi, const Tensor& x,
                                         const Tensor& upstream, ParamSet& grads,
                                         Tensor* input_grad) const {
  require_same_shape(x, upstream, "adapt_feature_backward");
  const std::size_t d = width(x.numel());
  const std::size_t L = x.numel() / d;
  const std::size_t n = config_.head_count;
  const Tensor& protos = psi.at("feat_proto");

  for (std::size_t j = 0; j < L; ++j) {
    Tensor xs = Tensor::vector(std::vector<double>(x.data() + j * d, x.data() + (j + 1) * d));
    Tensor us = Tensor::vector(
        std::vector<double>(upstream.data() + j * d, upstream.data() + (j + 1) * d));
    Tensor gates = gate_scores(psi, xs);

    Tensor score_grads = Tensor::zeros({n});
    for (std::size_t i = 0; i < n; ++i) {
      const Tensor& w = psi.at("feat_w" + std::to_string(i));
      const Tensor& b = psi.at("feat_b" + std::to_string(i));
      Tensor head = affine(w, b, xs);
      score_grads[i] = dot(us, head);

      Tensor& gw = grads.at("feat_w" + std::to_string(i));
      Tensor& gb = grads.at("feat_b" + std::to_string(i));
      for (std::size_t r = 0; r < d; ++r) {
        double u = gates[i] * us[r];
        gb[r] += u;
        double* grow = gw.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) grow[c] += u * xs[c];
      }
      if (input_grad) {
        double* dx = input_grad->data() + j * d;
        for (std::size_t r = 0; r < d; ++r) {
          const double* row = w.data() + r * d;
          for (std::size_t c = 0; c < d; ++c) dx[c] += gates[i] * row[c] * us[r];
        }
      }
    }

    Tensor logit_grads = softmax_temp_backward(gates, config_.temperature, score_grads);
    Tensor& gproto = grads.at("feat_proto");
    for (std::size_t i = 0; i < n; ++i) {
      auto cg = cosine_similarity_backward(proto_row(protos, i), xs, logit_grads[i]);
      for (std::size_t c = 0; c < d; ++c) gproto.data()[i * d + c] += cg.a_grad[c];
      if (input_grad) {
        double* dx = input_grad->data() + j * d;
        for (std::size_t c = 0; c < d; ++c) dx[c] += cg.b_grad[c];
      }
    }
    if (input_grad) {
      double* dx = input_grad->data() + j * d;
      for (std::size_t c = 0; c < d; ++c) dx[c] += us[c];  // residual path
    }
  }
}

void DataAdapter::label_gate_backward(const ParamSet& psi, const Tensor& gate_input,
                                      const Tensor& scores, const Tensor& score_grads,
                                      ParamSet& grads, Tensor* gate_input_grad) const {
  const std::size_t n = config_.head_count;
  Tensor logit_grads = softmax_temp_backward(scores, config_.temperature, score_grads);

  if (config_.label_gate == LabelGateMode::Shared) {
    const Tensor& protos = psi.at("feat_proto");
    Tensor& gproto = grads.at("feat_proto");
    const std::size_t d = gate_input.numel();
    for (std::size_t i = 0; i < n; ++i) {
      auto cg = cosine_similarity_backward(proto_row(protos, i), gate_input, logit_grads[i]);
      for (std::size_t c = 0; c < d; ++c) gproto.data()[i * d + c] += cg.a_grad[c];
      if (gate_input_grad) {
        for (std::size_t c = 0; c < d; ++c) (*gate_input_grad)[c] += cg.b_grad[c];
      }
    }
    return;
  }

  const Tensor& proj = psi.at("label_proj");
  const Tensor& protos = psi.at("label_proto");
  Tensor v;
  label_gate_logits(psi, gate_input, &v);

  Tensor dv = Tensor::zeros_like(v);
  Tensor& gproto = grads.at("label_proto");
  const std::size_t vd = v.numel();
  for (std::size_t i = 0; i < n; ++i) {
    auto cg = cosine_similarity_backward(proto_row(protos, i), v, logit_grads[i]);
    for (std::size_t c = 0; c < vd; ++c) {
      gproto.data()[i * vd + c] += cg.a_grad[c];
      dv[c] += cg.b_grad[c];
    }
  }
  Tensor& gproj = grads.at("label_proj");
  const std::size_t cols = proj.dim(1);
  for (std::size_t r = 0; r < vd; ++r) {
    double* grow = gproj.data() + r * cols;
    const double* prow = proj.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      grow[c] += dv[r] * gate_input[c];
      if (gate_input_grad) (*gate_input_grad)[c] += prow[c] * dv[r];
    }
  }
}

void DataAdapter::adapt_label_backward(const ParamSet& psi, const Tensor& gate_input, double y,
                                       double upstream, ParamSet& grads,
                                       Tensor* gate_input_grad) const {
  const Tensor& scale = psi.at("label_scale");
  const Tensor& shift = psi.at("label_shift");
  Tensor gates = label_gate_scores(psi, gate_input);
  const std::size_t n = config_.head_count;

  Tensor& gscale = grads.at("label_scale");
  Tensor& gshift = grads.at("label_shift");
  Tensor score_grads = Tensor::zeros({n});
  for (std::size_t i = 0; i < n; ++i) {
    gscale[i] += upstream * gates[i] * y;
    gshift[i] += upstream * gates[i];
    score_grads[i] = upstream * (scale[i] * y + shift[i]);
  }
  label_gate_backward(psi, gate_input, gates, score_grads, grads, gate_input_grad);
}

void DataAdapter::invert_prediction_backward(const ParamSet& psi, const Tensor& gate_input,
                                             double intermediate, double upstream, ParamSet& grads,
                                             double* intermediate_grad,
                                             Tensor* gate_input_grad) const {
  const Tensor& scale = psi.at("label_scale");
  const Tensor& shift = psi.at("label_shift");
  check_gamma(scale);
  Tensor gates = label_gate_scores(psi, gate_input);
  const std::size_t n = config_.head_count;

  Tensor& gscale = grads.at("label_scale");
  Tensor& gshift = grads.at("label_shift");
  Tensor score_grads = Tensor::zeros({n});
  double dmid = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double centered = intermediate - shift[i];
    gscale[i] += -upstream * gates[i] * centered / (scale[i] * scale[i]);
    gshift[i] += -upstream * gates[i] / scale[i];
    score_grads[i] = upstream * centered / scale[i];
    dmid += gates[i] / scale[i];
  }
  if (intermediate_grad) *intermediate_grad += upstream * dmid;
  label_gate_backward(psi, gate_input, gates, score_grads, grads, gate_input_grad);
}

void DataAdapter::project_gamma(ParamSet& psi) const {
  Tensor& scale = psi.at("label_scale");
  for (std::size_t i = 0; i < scale.numel(); ++i) {
    double sign = scale[i] < 0.0 ? -1.0 : 1.0;
    scale[i] = sign * std::max(std::abs(scale[i]), config_.gamma_min);
  }
}

bool DataAdapter::is_feature_entry(const std::string& name) {
  return name.rfind("feat_", 0) == 0;
}

bool DataAdapter::is_label_head_entry(const std::string& name) {
  return name == "label_scale" || name == "label_shift";
}

}  // namespace metadapt
