#pragma once

#include "metadapt/tensor.hpp"

namespace metadapt {

// Dense primitives with analytic reverse-mode gradients. The model zoo is
// small and fixed, so each primitive ships its own backward instead of a
// tape; every formula is verified against central finite differences.

/// y = W x + b with W [m x n], b [m], x [n].
Tensor affine(const Tensor& w, const Tensor& b, const Tensor& x);

struct AffineGrads {
  Tensor w_grad;
  Tensor b_grad;
  Tensor x_grad;
};

/// upstream [m] -> dW = upstream ⊗ x, db = upstream, dx = W^T upstream.
AffineGrads affine_backward(const Tensor& w, const Tensor& x, const Tensor& upstream);

struct CosineResult {
  double value = 0.0;
  bool degenerate = false;  // a zero-norm input was seen
};

/// a·b / (|a||b|); zero-norm inputs yield 0 with the degenerate flag set
/// (all-zero feature rows occur in synthetic streams and must not abort).
CosineResult cosine_similarity_checked(const Tensor& a, const Tensor& b);
double cosine_similarity(const Tensor& a, const Tensor& b);

struct CosineGrads {
  Tensor a_grad;
  Tensor b_grad;
};

/// Gradients of cosine_similarity times a scalar upstream. Degenerate
/// inputs get zero gradients (the value is pinned at 0 there).
CosineGrads cosine_similarity_backward(const Tensor& a, const Tensor& b, double upstream);

/// Temperature softmax with max-subtraction: s_i = exp(l_i/tau)/sum_j exp(l_j/tau).
Tensor softmax_temp(const Tensor& logits, double tau);

/// dl_j = (1/tau) * s_j * (u_j - sum_i u_i s_i).
Tensor softmax_temp_backward(const Tensor& softmax_out, double tau, const Tensor& upstream);

/// (1/n) sum (pred_i - target_i)^2. Empty input is an error.
double mse(const Tensor& pred, const Tensor& target);

/// d/dpred = (2/n)(pred - target).
Tensor mse_backward(const Tensor& pred, const Tensor& target);

double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);

}  // namespace metadapt
