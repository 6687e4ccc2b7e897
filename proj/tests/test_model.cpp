#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "metadapt/checkpoint.hpp"
#include "metadapt/diff_maps.hpp"
#include "metadapt/errors.hpp"
#include "metadapt/grad_check.hpp"
#include "metadapt/model.hpp"
#include "metadapt/ops.hpp"
#include "metadapt/optim.hpp"
#include "metadapt/rng.hpp"

using namespace metadapt;

namespace {

Tensor random_batch(std::mt19937_64& rng, std::size_t rows, std::size_t d) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor t = Tensor::zeros({rows, d});
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
  return t;
}

}  // namespace

TEST_CASE("linear model predictions") {
  LinearModel model;
  ParamSet params;
  params.add("weight", Tensor::vector({1, 0}));
  params.add("bias", Tensor::vector({1}));

  Tensor out = model.predict(params, Tensor::matrix(1, 2, {2, 5}));
  CHECK(out[0] == doctest::Approx(3.0));

  params.at("weight").values() = {0, 0};
  params.at("bias")[0] = 0.0;
  Tensor zeros = model.predict(params, Tensor::matrix(2, 2, {1, 2, 3, 4}));
  CHECK(zeros[0] == 0.0);
  CHECK(zeros[1] == 0.0);

  CHECK_THROWS_AS(model.predict(params, Tensor::matrix(1, 3, {1, 2, 3})), DimensionError);
}

TEST_CASE("mlp with zero weights outputs the final bias") {
  MlpModel model({4});
  ParamSet params = model.init(1, 3);
  params.fill(0.0);
  params.at("b1")[0] = 0.37;
  Tensor out = model.predict(params, Tensor::matrix(2, 3, {1, 2, 3, -1, -2, -3}));
  CHECK(out[0] == doctest::Approx(0.37));
  CHECK(out[1] == doctest::Approx(0.37));
}

TEST_CASE("loss_and_grads hand-checked scalar case") {
  LinearModel model;
  ParamSet params;
  params.add("weight", Tensor::vector({0.0}));
  params.add("bias", Tensor::vector({0.0}));
  auto [loss, grads] = model.loss_and_grads(params, Tensor::matrix(1, 1, {1}), Tensor::vector({2}));
  CHECK(loss == doctest::Approx(4.0));
  CHECK(grads.at("weight")[0] == doctest::Approx(-4.0));
  CHECK(grads.at("bias")[0] == doctest::Approx(-4.0));

  // perfect fit: zero loss, zero grads
  params.at("weight")[0] = 2.0;
  auto [fit_loss, fit_grads] =
      model.loss_and_grads(params, Tensor::matrix(1, 1, {1}), Tensor::vector({2}));
  CHECK(fit_loss == 0.0);
  CHECK(fit_grads.at("weight")[0] == 0.0);

  CHECK_THROWS_AS(model.loss_and_grads(params, Tensor::zeros({0, 1}), Tensor::vector({})),
                  DataError);
}

TEST_CASE("model gradients match finite differences") {
  MlpModel mlp({6});
  LinearModel linear;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto rng = substream(seed, "model_fd");
    Tensor batch = random_batch(rng, 4, 3);
    CHECK(finite_difference_check(ModelBatchMap{mlp}, mlp.init(seed, 3), batch, 1e-6) <= 1e-5);
    CHECK(finite_difference_check(ModelBatchMap{linear}, linear.init(seed, 3), batch, 1e-6) <=
          1e-5);
  }
}

TEST_CASE("a small gradient step decreases the loss") {
  MlpModel model({8});
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto rng = substream(seed, "descent");
    ParamSet params = model.init(seed, 5);
    Tensor batch = random_batch(rng, 6, 5);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Tensor labels = Tensor::zeros({6});
    for (std::size_t i = 0; i < 6; ++i) labels[i] = dist(rng);

    auto [loss, grads] = model.loss_and_grads(params, batch, labels);
    ParamSet stepped = sgd_step(params, grads, 1e-3);
    auto [next_loss, unused] = model.loss_and_grads(stepped, batch, labels);
    (void)unused;
    CHECK(next_loss <= loss + 1e-12);
  }
}

TEST_CASE("predictions depend only on their own row") {
  MlpModel model({8});
  ParamSet params = model.init(3, 4);
  auto rng = substream(9, "perm");
  Tensor batch = random_batch(rng, 5, 4);
  Tensor out = model.predict(params, batch);

  std::vector<std::size_t> perm = {4, 2, 0, 1, 3};
  Tensor shuffled = Tensor::zeros({5, 4});
  for (std::size_t r = 0; r < 5; ++r) {
    std::copy(batch.data() + perm[r] * 4, batch.data() + (perm[r] + 1) * 4,
              shuffled.data() + r * 4);
  }
  Tensor out_shuffled = model.predict(params, shuffled);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(out_shuffled[r] == out[perm[r]]);
  }
}

TEST_CASE("seeded init is deterministic and respects fan-in bounds") {
  MlpModel model({16});
  ParamSet a = model.init(77, 10);
  ParamSet b = model.init(77, 10);
  for (auto ita = a.begin(), itb = b.begin(); ita != a.end(); ++ita, ++itb) {
    for (std::size_t i = 0; i < ita->second.numel(); ++i) {
      CHECK(ita->second[i] == itb->second[i]);
    }
  }
  double bound = 1.0 / std::sqrt(10.0);
  for (std::size_t i = 0; i < a.at("w0").numel(); ++i) {
    CHECK(std::abs(a.at("w0")[i]) <= bound);
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  MlpModel model({7});
  ParamSet params = model.init(123, 6);
  auto path = std::filesystem::temp_directory_path() / "metadapt_ckpt_test.json";
  save_param_set(path.string(), params);
  ParamSet loaded = load_param_set(path.string());
  REQUIRE(loaded.compatible_with(params));
  for (auto ita = params.begin(), itb = loaded.begin(); ita != params.end(); ++ita, ++itb) {
    for (std::size_t i = 0; i < ita->second.numel(); ++i) {
      CHECK(ita->second[i] == itb->second[i]);
    }
  }
  std::filesystem::remove(path);
}
