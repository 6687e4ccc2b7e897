#include <doctest.h>

#include <cmath>
#include <random>

#include "metadapt/errors.hpp"
#include "metadapt/ops.hpp"
#include "metadapt/rng.hpp"
#include "metadapt/tensor.hpp"

using namespace metadapt;

TEST_CASE("tensor shape and data agree") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), DimensionError);
  Tensor t = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.at(1, 2) == 6.0);
}

TEST_CASE("affine identity and scalar cases") {
  Tensor identity = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor zero_bias = Tensor::vector({0, 0});
  Tensor x = Tensor::vector({3, -1});
  Tensor out = affine(identity, zero_bias, x);
  CHECK(out[0] == 3.0);
  CHECK(out[1] == -1.0);

  // 2*3 + 1 = 7
  Tensor w = Tensor::matrix(1, 1, {2});
  Tensor b = Tensor::vector({1});
  Tensor y = affine(w, b, Tensor::vector({3}));
  CHECK(y[0] == doctest::Approx(7.0).epsilon(1e-15));

  auto grads = affine_backward(w, Tensor::vector({3}), Tensor::vector({1}));
  CHECK(grads.w_grad[0] == doctest::Approx(3.0));
  CHECK(grads.b_grad[0] == doctest::Approx(1.0));
  CHECK(grads.x_grad[0] == doctest::Approx(2.0));
}

TEST_CASE("affine rejects mismatched shapes naming both") {
  Tensor w = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::vector({0, 0});
  CHECK_THROWS_WITH_AS(affine(w, b, Tensor::vector({1, 2})),
                       doctest::Contains("[2x3]"), DimensionError);
}

TEST_CASE("cosine similarity basics") {
  CHECK(cosine_similarity(Tensor::vector({1, 2}), Tensor::vector({1, 2})) ==
        doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cosine_similarity(Tensor::vector({1, 0}), Tensor::vector({0, 1})) == doctest::Approx(0.0));
  CHECK(cosine_similarity(Tensor::vector({1, 0}), Tensor::vector({-1, 0})) ==
        doctest::Approx(-1.0));
}

TEST_CASE("cosine similarity zero norm flags degenerate") {
  auto r = cosine_similarity_checked(Tensor::vector({0, 0}), Tensor::vector({1, 2}));
  CHECK(r.value == 0.0);
  CHECK(r.degenerate);
  auto ok = cosine_similarity_checked(Tensor::vector({1, 1}), Tensor::vector({1, 2}));
  CHECK_FALSE(ok.degenerate);
}

TEST_CASE("cosine similarity symmetry and scale invariance") {
  auto rng = substream(11, "cos_prop");
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::uniform_real_distribution<double> scale_dist(0.1, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a = Tensor::zeros({5}), b = Tensor::zeros({5});
    for (std::size_t i = 0; i < 5; ++i) {
      a[i] = dist(rng);
      b[i] = dist(rng);
    }
    double lambda = scale_dist(rng);
    CHECK(cosine_similarity(a, b) == doctest::Approx(cosine_similarity(b, a)).epsilon(1e-12));
    Tensor scaled = a;
    for (std::size_t i = 0; i < 5; ++i) scaled[i] *= lambda;
    CHECK(cosine_similarity(scaled, b) ==
          doctest::Approx(cosine_similarity(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("softmax_temp equal logits and reference values") {
  Tensor s = softmax_temp(Tensor::vector({0.4, 0.4, 0.4}), 10.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  // e/(e+1) evaluated at high precision
  Tensor t = softmax_temp(Tensor::vector({1, 0}), 1.0);
  CHECK(t[0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
  CHECK(t[1] == doctest::Approx(0.2689414213699951).epsilon(1e-12));

  // large temperature flattens toward uniform
  Tensor flat = softmax_temp(Tensor::vector({1, 0}), 1000.0);
  CHECK(std::abs(flat[0] - 0.5) < 1e-3);
  CHECK(std::abs(flat[1] - 0.5) < 1e-3);
}

TEST_CASE("softmax_temp sums to one and rejects bad tau") {
  auto rng = substream(3, "softmax_prop");
  std::uniform_real_distribution<double> dist(-30.0, 30.0);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor logits = Tensor::zeros({7});
    for (std::size_t i = 0; i < 7; ++i) logits[i] = dist(rng);
    Tensor s = softmax_temp(logits, 0.5);
    double total = 0.0;
    for (std::size_t i = 0; i < 7; ++i) {
      total += s[i];
      CHECK(s[i] >= 0.0);
      CHECK(s[i] <= 1.0);
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
  CHECK_THROWS_AS(softmax_temp(Tensor::vector({1, 2}), 0.0), ConfigError);
  CHECK_THROWS_AS(softmax_temp(Tensor::vector({1, 2}), -1.0), ConfigError);
}

TEST_CASE("softmax_temp is permutation equivariant") {
  Tensor logits = Tensor::vector({0.3, -1.2, 2.0, 0.7});
  Tensor s = softmax_temp(logits, 2.5);
  std::vector<std::size_t> perm = {2, 0, 3, 1};
  Tensor permuted = Tensor::zeros({4});
  for (std::size_t i = 0; i < 4; ++i) permuted[i] = logits[perm[i]];
  Tensor sp = softmax_temp(permuted, 2.5);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(sp[i] == doctest::Approx(s[perm[i]]).epsilon(1e-15));
  }
}

TEST_CASE("mse values and gradient") {
  Tensor p = Tensor::vector({1, 1});
  Tensor zero = Tensor::vector({0, 0});
  CHECK(mse(p, p) == 0.0);
  CHECK(mse(p, zero) == doctest::Approx(1.0));
  Tensor g = mse_backward(p, zero);
  CHECK(g[0] == doctest::Approx(1.0));
  CHECK(g[1] == doctest::Approx(1.0));
  CHECK_THROWS_AS(mse(Tensor::vector({}), Tensor::vector({})), DataError);
}
