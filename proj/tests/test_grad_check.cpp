#include <doctest.h>

#include <random>

#include "metadapt/diff_maps.hpp"
#include "metadapt/grad_check.hpp"
#include "metadapt/rng.hpp"

using namespace metadapt;

namespace {

// Values bounded away from zero keep the relative-error denominator honest.
double bounded(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.2, 1.0);
  std::bernoulli_distribution flip(0.5);
  double v = mag(rng);
  return flip(rng) ? v : -v;
}

Tensor random_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = bounded(rng);
  return t;
}

struct ConstantMap final : DifferentiableMap {
  Tensor forward(const ParamSet&, const Tensor&) const override { return Tensor::scalar(4.2); }
  std::pair<ParamSet, Tensor> backward(const ParamSet& params, const Tensor& input,
                                       const Tensor&) const override {
    return {ParamSet::zeros_like(params), Tensor::zeros_like(input)};
  }
};

}  // namespace

TEST_CASE("finite differences confirm the affine gradients") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto rng = substream(seed, "fd_affine");
    ParamSet params;
    params.add("w", random_tensor(rng, {3, 4}));
    params.add("b", random_tensor(rng, {3}));
    Tensor input = random_tensor(rng, {4});
    CHECK(finite_difference_check(AffineMap{}, params, input, 1e-6) <= 1e-5);
  }
}

TEST_CASE("constant map reports zero error") {
  ParamSet params;
  params.add("w", Tensor::vector({1.0, 2.0}));
  CHECK(finite_difference_check(ConstantMap{}, params, Tensor::vector({0.5}), 1e-6) == 0.0);
}

TEST_CASE("finite differences confirm the mlp gradients including inputs") {
  MlpModel model({5});
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto rng = substream(seed, "fd_mlp");
    ParamSet params = model.init(substream_seed(seed, "fd_mlp_params"), 4);
    Tensor batch = random_tensor(rng, {3, 4});
    CHECK(finite_difference_check(ModelBatchMap{model}, params, batch, 1e-6) <= 1e-5);
  }
}

TEST_CASE("gradient check rejects a wrong backward") {
  struct WrongMap final : DifferentiableMap {
    Tensor forward(const ParamSet& params, const Tensor&) const override {
      const Tensor& w = params.at("w");
      return Tensor::scalar(w[0] * w[0]);
    }
    std::pair<ParamSet, Tensor> backward(const ParamSet& params, const Tensor& input,
                                         const Tensor& upstream) const override {
      ParamSet grads = ParamSet::zeros_like(params);
      grads.at("w")[0] = 3.0 * params.at("w")[0] * upstream[0];  // deliberately off
      return {std::move(grads), Tensor::zeros_like(input)};
    }
  };
  ParamSet params;
  params.add("w", Tensor::vector({0.8}));
  CHECK(finite_difference_check(WrongMap{}, params, Tensor::scalar(0.0), 1e-6) > 1e-2);
}
