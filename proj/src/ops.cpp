#include "metadapt/ops.hpp"

#include <algorithm>
#include <cmath>

#include "metadapt/errors.hpp"

namespace metadapt {

Tensor affine(const Tensor& w, const Tensor& b, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || b.rank() != 1) {
    throw DimensionError("affine: expected W" + w.shape_str() + " rank 2, b" + b.shape_str() +
                         " and x" + x.shape_str() + " rank 1");
  }
  std::size_t m = w.dim(0), n = w.dim(1);
  if (x.numel() != n || b.numel() != m) {
    throw DimensionError("affine: W" + w.shape_str() + " incompatible with b" + b.shape_str() +
                         ", x" + x.shape_str());
  }
  Tensor out = Tensor::zeros({m});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = b[i];
    const double* row = w.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
    out[i] = acc;
  }
  return out;
}

AffineGrads affine_backward(const Tensor& w, const Tensor& x, const Tensor& upstream) {
  std::size_t m = w.dim(0), n = w.dim(1);
  if (upstream.numel() != m) {
    throw DimensionError("affine_backward: upstream" + upstream.shape_str() + " vs W" +
                         w.shape_str());
  }
  AffineGrads g{Tensor::zeros({m, n}), Tensor::zeros({m}), Tensor::zeros({n})};
  for (std::size_t i = 0; i < m; ++i) {
    double u = upstream[i];
    g.b_grad[i] = u;
    const double* row = w.data() + i * n;
    double* grow = g.w_grad.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      grow[j] = u * x[j];
      g.x_grad[j] += row[j] * u;
    }
  }
  return g;
}

CosineResult cosine_similarity_checked(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "cosine_similarity");
  double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0) return {0.0, true};
  double c = dot(a, b) / (na * nb);
  return {std::clamp(c, -1.0, 1.0), false};
}

double cosine_similarity(const Tensor& a, const Tensor& b) {
  return cosine_similarity_checked(a, b).value;
}

CosineGrads cosine_similarity_backward(const Tensor& a, const Tensor& b, double upstream) {
  require_same_shape(a, b, "cosine_similarity_backward");
  CosineGrads g{Tensor::zeros_like(a), Tensor::zeros_like(b)};
  double na = norm2(a), nb = norm2(b);
  if (na == 0.0 || nb == 0.0) return g;
  double c = dot(a, b) / (na * nb);
  for (std::size_t i = 0; i < a.numel(); ++i) {
    g.a_grad[i] = upstream * (b[i] / (na * nb) - c * a[i] / (na * na));
    g.b_grad[i] = upstream * (a[i] / (na * nb) - c * b[i] / (nb * nb));
  }
  return g;
}

Tensor softmax_temp(const Tensor& logits, double tau) {
  if (tau <= 0.0) throw ConfigError("softmax temperature must be positive, got " + std::to_string(tau));
  if (logits.numel() == 0) throw DimensionError("softmax_temp: empty logits");
  double top = *std::max_element(logits.values().begin(), logits.values().end());
  Tensor out = Tensor::zeros_like(logits);
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    out[i] = std::exp((logits[i] - top) / tau);
    denom += out[i];
  }
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] /= denom;
  return out;
}

Tensor softmax_temp_backward(const Tensor& softmax_out, double tau, const Tensor& upstream) {
  require_same_shape(softmax_out, upstream, "softmax_temp_backward");
  double mix = dot(upstream, softmax_out);
  Tensor out = Tensor::zeros_like(softmax_out);
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = softmax_out[i] * (upstream[i] - mix) / tau;
  }
  return out;
}

double mse(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse");
  if (pred.numel() == 0) throw DataError("mse: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.numel());
}

Tensor mse_backward(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse_backward");
  if (pred.numel() == 0) throw DataError("mse_backward: empty batch");
  double scale = 2.0 / static_cast<double>(pred.numel());
  Tensor out = Tensor::zeros_like(pred);
  for (std::size_t i = 0; i < pred.numel(); ++i) out[i] = scale * (pred[i] - target[i]);
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(const Tensor& a) { return std::sqrt(dot(a, a)); }

}  // namespace metadapt
