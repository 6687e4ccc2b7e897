#include "metadapt/model.hpp"

#include <cmath>

#include "metadapt/errors.hpp"
#include "metadapt/ops.hpp"
#include "metadapt/rng.hpp"

namespace metadapt {

namespace {

Tensor uniform_init(std::mt19937_64& rng, std::vector<std::size_t> shape, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

void require_batch(const Tensor& input, std::size_t feature_dim, const char* who) {
  if (input.rank() != 2 || input.dim(1) != feature_dim) {
    throw DimensionError(std::string(who) + ": expected batch [S x " + std::to_string(feature_dim) +
                         "], got " + input.shape_str());
  }
}

}  // namespace

std::pair<double, ParamSet> ForecastModel::loss_and_grads(const ParamSet& params,
                                                          const Tensor& features_batch,
                                                          const Tensor& labels) const {
  if (features_batch.rank() != 2 || features_batch.dim(0) != labels.numel() || labels.numel() == 0) {
    throw DataError("loss_and_grads: batch " + features_batch.shape_str() + " vs labels " +
                    labels.shape_str());
  }
  Tensor pred = forward(params, features_batch);
  double loss = mse(pred, labels);
  Tensor upstream = mse_backward(pred, labels);
  auto [grads, input_grad] = backward(params, features_batch, upstream);
  (void)input_grad;
  return {loss, std::move(grads)};
}

ParamSet LinearModel::init(std::uint64_t seed, std::size_t feature_dim) const {
  auto rng = substream(seed, "linear_init");
  double bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  ParamSet params;
  params.add("weight", uniform_init(rng, {feature_dim}, bound));
  params.add("bias", uniform_init(rng, {1}, bound));
  return params;
}

Tensor LinearModel::forward(const ParamSet& params, const Tensor& input) const {
  const Tensor& w = params.at("weight");
  const Tensor& b = params.at("bias");
  require_batch(input, w.numel(), "linear");
  std::size_t rows = input.dim(0), d = w.numel();
  Tensor out = Tensor::zeros({rows});
  for (std::size_t s = 0; s < rows; ++s) {
    const double* x = input.data() + s * d;
    double acc = b[0];
    for (std::size_t j = 0; j < d; ++j) acc += w[j] * x[j];
    out[s] = acc;
  }
  return out;
}

std::pair<ParamSet, Tensor> LinearModel::backward(const ParamSet& params, const Tensor& input,
                                                  const Tensor& upstream) const {
  const Tensor& w = params.at("weight");
  std::size_t rows = input.dim(0), d = w.numel();
  ParamSet grads = ParamSet::zeros_like(params);
  Tensor input_grad = Tensor::zeros_like(input);
  Tensor& w_grad = grads.at("weight");
  Tensor& b_grad = grads.at("bias");
  for (std::size_t s = 0; s < rows; ++s) {
    const double* x = input.data() + s * d;
    double* dx = input_grad.data() + s * d;
    double u = upstream[s];
    b_grad[0] += u;
    for (std::size_t j = 0; j < d; ++j) {
      w_grad[j] += u * x[j];
      dx[j] = u * w[j];
    }
  }
  return {std::move(grads), std::move(input_grad)};
}

MlpModel::MlpModel(std::vector<std::size_t> hidden_sizes) : hidden_sizes_(std::move(hidden_sizes)) {
  for (std::size_t h : hidden_sizes_) {
    if (h == 0) throw ConfigError("mlp: hidden layer size must be positive");
  }
}

ParamSet MlpModel::init(std::uint64_t seed, std::size_t feature_dim) const {
  auto rng = substream(seed, "mlp_init");
  ParamSet params;
  std::size_t fan_in = feature_dim;
  for (std::size_t layer = 0; layer < hidden_sizes_.size() + 1; ++layer) {
    std::size_t fan_out = layer < hidden_sizes_.size() ? hidden_sizes_[layer] : 1;
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    params.add("w" + std::to_string(layer), uniform_init(rng, {fan_out, fan_in}, bound));
    params.add("b" + std::to_string(layer), uniform_init(rng, {fan_out}, bound));
    fan_in = fan_out;
  }
  return params;
}

Tensor MlpModel::forward(const ParamSet& params, const Tensor& input) const {
  std::size_t feature_dim = params.at("w0").dim(1);
  require_batch(input, feature_dim, "mlp");
  const std::size_t n_layers = hidden_sizes_.size() + 1;
  std::size_t rows = input.dim(0);
  Tensor out = Tensor::zeros({rows});
  std::vector<double> h, z;
  for (std::size_t s = 0; s < rows; ++s) {
    h.assign(input.data() + s * feature_dim, input.data() + (s + 1) * feature_dim);
    for (std::size_t layer = 0; layer < n_layers; ++layer) {
      const Tensor& w = params.at("w" + std::to_string(layer));
      const Tensor& b = params.at("b" + std::to_string(layer));
      std::size_t m = w.dim(0), n = w.dim(1);
      z.assign(m, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        double acc = b[i];
        const double* row = w.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * h[j];
        z[i] = layer + 1 < n_layers ? std::tanh(acc) : acc;
      }
      h = z;
    }
    out[s] = h[0];
  }
  return out;
}

std::pair<ParamSet, Tensor> MlpModel::backward(const ParamSet& params, const Tensor& input,
                                               const Tensor& upstream) const {
  std::size_t feature_dim = params.at("w0").dim(1);
  require_batch(input, feature_dim, "mlp");
  const std::size_t n_layers = hidden_sizes_.size() + 1;
  std::size_t rows = input.dim(0);
  ParamSet grads = ParamSet::zeros_like(params);
  Tensor input_grad = Tensor::zeros_like(input);

  // Per-sample forward with stored activations, then reverse pass.
  std::vector<std::vector<double>> acts(n_layers + 1);
  for (std::size_t s = 0; s < rows; ++s) {
    acts[0].assign(input.data() + s * feature_dim, input.data() + (s + 1) * feature_dim);
    for (std::size_t layer = 0; layer < n_layers; ++layer) {
      const Tensor& w = params.at("w" + std::to_string(layer));
      const Tensor& b = params.at("b" + std::to_string(layer));
      std::size_t m = w.dim(0), n = w.dim(1);
      acts[layer + 1].assign(m, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        double acc = b[i];
        const double* row = w.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * acts[layer][j];
        acts[layer + 1][i] = layer + 1 < n_layers ? std::tanh(acc) : acc;
      }
    }

    std::vector<double> delta{upstream[s]};
    for (std::size_t layer = n_layers; layer-- > 0;) {
      const Tensor& w = params.at("w" + std::to_string(layer));
      Tensor& w_grad = grads.at("w" + std::to_string(layer));
      Tensor& b_grad = grads.at("b" + std::to_string(layer));
      std::size_t m = w.dim(0), n = w.dim(1);
      std::vector<double> delta_prev(n, 0.0);
      for (std::size_t i = 0; i < m; ++i) {
        double d = delta[i];
        b_grad[i] += d;
        const double* row = w.data() + i * n;
        double* grow = w_grad.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
          grow[j] += d * acts[layer][j];
          delta_prev[j] += row[j] * d;
        }
      }
      if (layer > 0) {
        // tanh' through the stored activation of the layer below
        for (std::size_t j = 0; j < n; ++j) {
          double a = acts[layer][j];
          delta_prev[j] *= 1.0 - a * a;
        }
      }
      delta = std::move(delta_prev);
    }
    double* dx = input_grad.data() + s * feature_dim;
    for (std::size_t j = 0; j < feature_dim; ++j) dx[j] = delta[j];
  }
  return {std::move(grads), std::move(input_grad)};
}

std::unique_ptr<ForecastModel> make_model(const std::string& backbone,
                                          const std::vector<std::size_t>& hidden_sizes) {
  if (backbone == "linear") return std::make_unique<LinearModel>();
  if (backbone == "mlp") return std::make_unique<MlpModel>(hidden_sizes);
  throw ConfigError("unknown backbone '" + backbone + "' (expected linear or mlp)");
}

}  // namespace metadapt
