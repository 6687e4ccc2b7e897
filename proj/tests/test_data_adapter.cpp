#include <doctest.h>

#include <cmath>
#include <random>

#include "metadapt/data_adapter.hpp"
#include "metadapt/diff_maps.hpp"
#include "metadapt/errors.hpp"
#include "metadapt/grad_check.hpp"
#include "metadapt/model_adapter.hpp"
#include "metadapt/ops.hpp"
#include "metadapt/rng.hpp"

using namespace metadapt;

namespace {

DataAdapterConfig small_config(std::size_t heads, double tau = 10.0) {
  DataAdapterConfig config;
  config.head_count = heads;
  config.temperature = tau;
  config.label_gate_dim = 4;
  return config;
}

double bounded(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.2, 1.0);
  std::bernoulli_distribution flip(0.5);
  double v = mag(rng);
  return flip(rng) ? v : -v;
}

void randomize(ParamSet& psi, std::mt19937_64& rng) {
  for (auto& [name, tensor] : psi) {
    for (std::size_t i = 0; i < tensor.numel(); ++i) tensor[i] = bounded(rng);
  }
}

Tensor random_vector(std::mt19937_64& rng, std::size_t d) {
  Tensor t = Tensor::zeros({d});
  for (std::size_t i = 0; i < d; ++i) t[i] = bounded(rng);
  return t;
}

}  // namespace

TEST_CASE("gate scores: sharp softmax picks the aligned prototype") {
  DataAdapter adapter(small_config(2, 0.01));
  ParamSet psi = adapter.init(1, 2);
  psi.at("feat_proto").values() = {1, 0, 0, 1};
  Tensor s = adapter.gate_scores(psi, Tensor::vector({1, 0}));
  CHECK(s[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(s[1] == doctest::Approx(0.0).scale(1).epsilon(1e-6));
}

TEST_CASE("gate scores: identical prototypes give uniform gates") {
  DataAdapter adapter(small_config(4));
  ParamSet psi = adapter.init(2, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    psi.at("feat_proto").data()[i * 3 + 0] = 0.3;
    psi.at("feat_proto").data()[i * 3 + 1] = -0.1;
    psi.at("feat_proto").data()[i * 3 + 2] = 0.9;
  }
  Tensor s = adapter.gate_scores(psi, Tensor::vector({0.5, 2.0, -1.0}));
  for (std::size_t i = 0; i < 4; ++i) CHECK(s[i] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("gate scores: temperature 10 reference value") {
  // cos values (1, 0) -> softmax([0.1, 0]) = [0.52497918747894, 0.47502081...]
  DataAdapter adapter(small_config(2, 10.0));
  ParamSet psi = adapter.init(3, 2);
  psi.at("feat_proto").values() = {1, 0, 0, 1};
  Tensor s = adapter.gate_scores(psi, Tensor::vector({1, 0}));
  CHECK(s[0] == doctest::Approx(0.5249791874789399).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(0.4750208125210601).epsilon(1e-12));
}

TEST_CASE("gate scores sum to one with each in [0,1]") {
  DataAdapter adapter(small_config(8, 0.5));
  ParamSet psi = adapter.init(5, 6);
  auto rng = substream(5, "gates");
  for (int trial = 0; trial < 30; ++trial) {
    Tensor s = adapter.gate_scores(psi, random_vector(rng, 6));
    double total = 0.0;
    for (std::size_t i = 0; i < s.numel(); ++i) {
      total += s[i];
      CHECK(s[i] >= 0.0);
      CHECK(s[i] <= 1.0);
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("adapt_feature: zero heads are the identity, single identity head doubles") {
  DataAdapter adapter(small_config(3));
  ParamSet psi = adapter.init(7, 4);
  Tensor x = Tensor::vector({0.5, -1.0, 2.0, 0.25});
  Tensor same = adapter.adapt_feature(psi, x);
  for (std::size_t i = 0; i < 4; ++i) CHECK(same[i] == x[i]);

  DataAdapter single(small_config(1));
  ParamSet one = single.init(7, 4);
  for (std::size_t i = 0; i < 4; ++i) one.at("feat_w0").at(i, i) = 1.0;
  Tensor doubled = single.adapt_feature(one, x);
  for (std::size_t i = 0; i < 4; ++i) CHECK(doubled[i] == doctest::Approx(2.0 * x[i]));
}

TEST_CASE("adapt_feature perturbation is bounded by the largest head output") {
  DataAdapter adapter(small_config(4, 2.0));
  ParamSet psi = adapter.init(11, 5);
  auto rng = substream(11, "lipschitz");
  randomize(psi, rng);
  adapter.project_gamma(psi);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_vector(rng, 5);
    Tensor adapted = adapter.adapt_feature(psi, x);
    double diff = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      double d = adapted[i] - x[i];
      diff += d * d;
    }
    diff = std::sqrt(diff);
    double biggest = 0.0;
    for (std::size_t h = 0; h < 4; ++h) {
      Tensor head = affine(psi.at("feat_w" + std::to_string(h)),
                           psi.at("feat_b" + std::to_string(h)), x);
      biggest = std::max(biggest, norm2(head));
    }
    CHECK(diff <= biggest + 1e-12);
  }
}

TEST_CASE("label gates: single head is [1], identical prototypes uniform") {
  DataAdapter adapter(small_config(1));
  ParamSet psi = adapter.init(3, 5);
  CHECK(adapter.label_gate_scores(psi, Tensor::vector({1, 2, 3, 4, 5}))[0] == 1.0);

  DataAdapter multi(small_config(3));
  ParamSet m = multi.init(3, 5);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t c = 0; c < 4; ++c) m.at("label_proto").data()[i * 4 + c] = 0.3 - 0.1 * c;
  }
  Tensor s = multi.label_gate_scores(m, Tensor::vector({1, 2, 3, 4, 5}));
  for (std::size_t i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("adapt_label examples") {
  SUBCASE("identity heads return the label") {
    DataAdapter adapter(small_config(6));
    ParamSet psi = adapter.init(9, 3);
    double y = adapter.adapt_label(psi, Tensor::vector({0.2, -0.4, 1.0}), 1.7);
    CHECK(y == doctest::Approx(1.7).epsilon(1e-14));
  }
  SUBCASE("single head scale and shift") {
    DataAdapter adapter(small_config(1));
    ParamSet psi = adapter.init(9, 3);
    psi.at("label_scale")[0] = 2.0;
    psi.at("label_shift")[0] = 0.5;
    CHECK(adapter.adapt_label(psi, Tensor::vector({1, 0, 0}), 1.0) == doctest::Approx(2.5));
  }
  SUBCASE("two heads average per the gates") {
    DataAdapter adapter(small_config(2));
    ParamSet psi = adapter.init(9, 3);
    // equal prototypes force gates [0.5, 0.5]
    for (std::size_t c = 0; c < 4; ++c) {
      psi.at("label_proto").data()[0 * 4 + c] = 0.25;
      psi.at("label_proto").data()[1 * 4 + c] = 0.25;
    }
    psi.at("label_scale").values() = {1.0, 1.0};
    psi.at("label_shift").values() = {1.0, -1.0};
    CHECK(adapter.adapt_label(psi, Tensor::vector({1, 2, 3}), 3.0) == doctest::Approx(3.0));
  }
}

TEST_CASE("invert_prediction examples") {
  SUBCASE("identity heads pass predictions through") {
    DataAdapter adapter(small_config(5));
    ParamSet psi = adapter.init(13, 4);
    Tensor x = Tensor::vector({0.1, 0.2, 0.3, 0.4});
    CHECK(adapter.invert_prediction(psi, x, 0.77) == doctest::Approx(0.77).epsilon(1e-14));
  }

  SUBCASE("single head round trip is exact") {
    DataAdapter adapter(small_config(1));
    ParamSet psi = adapter.init(13, 2);
    auto rng = substream(21, "roundtrip");
    std::uniform_real_distribution<double> gamma_dist(-2.0, 2.0);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    int done = 0;
    while (done < 1000) {
      double gamma = gamma_dist(rng);
      if (std::abs(gamma) < 1e-3) continue;
      ++done;
      psi.at("label_scale")[0] = gamma;
      psi.at("label_shift")[0] = unit(rng);
      double y = unit(rng);
      Tensor x = Tensor::vector({unit(rng), unit(rng)});
      double restored = adapter.invert_prediction(psi, x, adapter.adapt_label(psi, x, y));
      CHECK(std::abs(restored - y) <= 1e-12);
    }
  }

  SUBCASE("two distinct heads: inverse of 1.5 per hand evaluation") {
    DataAdapter adapter(small_config(2));
    ParamSet psi = adapter.init(13, 3);
    for (std::size_t c = 0; c < 4; ++c) {
      psi.at("label_proto").data()[0 * 4 + c] = 0.25;
      psi.at("label_proto").data()[1 * 4 + c] = 0.25;  // gates [0.5, 0.5]
    }
    psi.at("label_scale").values() = {2.0, 1.0};
    psi.at("label_shift").values() = {0.0, 1.0};
    Tensor x = Tensor::vector({1, 2, 3});
    // 0.5*(1.5/2) + 0.5*((1.5-1)/1) = 0.625
    CHECK(adapter.invert_prediction(psi, x, 1.5) == doctest::Approx(0.625).epsilon(1e-14));
    // multi-head round trips are generally not the identity: H(0) = 0.5,
    // H_inv(0.5) = 0.5*(0.5/2) + 0.5*(0.5-1) = -0.125
    double adapted = adapter.adapt_label(psi, x, 0.0);
    CHECK(adapted == doctest::Approx(0.5));
    CHECK(adapter.invert_prediction(psi, x, adapted) == doctest::Approx(-0.125));
  }

  SUBCASE("gamma below the guard is rejected") {
    DataAdapter adapter(small_config(1));
    ParamSet psi = adapter.init(13, 2);
    psi.at("label_scale")[0] = 1e-9;
    CHECK_THROWS_AS(adapter.invert_prediction(psi, Tensor::vector({1, 0}), 1.0), ConfigError);
  }
}

TEST_CASE("project_gamma restores the invertibility guard") {
  DataAdapter adapter(small_config(3));
  ParamSet psi = adapter.init(17, 2);
  psi.at("label_scale").values() = {1e-9, -1e-7, 0.5};
  adapter.project_gamma(psi);
  CHECK(psi.at("label_scale")[0] == doctest::Approx(1e-3));
  CHECK(psi.at("label_scale")[1] == doctest::Approx(-1e-3));
  CHECK(psi.at("label_scale")[2] == doctest::Approx(0.5));
}

TEST_CASE("adapted train and test sets") {
  DataAdapter adapter(small_config(4));
  ParamSet psi = adapter.init(19, 3);
  Tensor features = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  Tensor labels = Tensor::vector({0.5, -0.5});

  SUBCASE("identity psi reproduces the originals") {
    AdaptedTrainSet train = adapt_train_set(adapter, psi, features, labels);
    for (std::size_t i = 0; i < 6; ++i) CHECK(train.features[i] == features[i]);
    CHECK(train.labels[0] == doctest::Approx(0.5).epsilon(1e-14));
    AdaptedTestFeatures test = adapt_test_features(adapter, psi, features);
    for (std::size_t i = 0; i < 6; ++i) CHECK(test.features[i] == features[i]);
  }

  SUBCASE("adapted labels differ from originals iff heads are non-identity") {
    auto rng = substream(23, "train_adapt");
    randomize(psi, rng);
    adapter.project_gamma(psi);
    AdaptedTrainSet train = adapt_train_set(adapter, psi, features, labels);
    CHECK(train.labels[0] != labels[0]);
    CHECK(train.features.dim(0) == 2);
  }

  SUBCASE("single-sample task adapts to a single sample") {
    AdaptedTrainSet train =
        adapt_train_set(adapter, psi, Tensor::matrix(1, 3, {1, 2, 3}), Tensor::vector({1.0}));
    CHECK(train.labels.numel() == 1);
  }
}

TEST_CASE("full adapter paths pass the finite-difference check") {
  auto check_paths = [](DataAdapterConfig config, std::size_t feature_dim) {
    DataAdapter adapter(config);
    MlpModel model({4});
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto rng = substream(seed, "da_fd");
      ParamSet psi = adapter.init(seed, feature_dim);
      randomize(psi, rng);
      adapter.project_gamma(psi);
      Tensor x = random_vector(rng, feature_dim);

      CHECK(finite_difference_check(FeatureAdaptMap{adapter}, psi, x, 1e-6) <= 1e-5);
      CHECK(finite_difference_check(GatingMap{adapter}, psi,
                                    random_vector(rng, adapter.width(feature_dim)), 1e-6) <= 1e-5);

      Tensor packed = Tensor::zeros({feature_dim + 1});
      for (std::size_t i = 0; i < feature_dim; ++i) packed[i] = x[i];
      packed[feature_dim] = bounded(rng);
      CHECK(finite_difference_check(LabelAdaptMap{adapter}, psi, packed, 1e-6) <= 1e-5);

      ParamSet theta = model.init(seed, feature_dim);
      CHECK(finite_difference_check(InvertCompositeMap{adapter, model, theta}, psi, x, 1e-6) <=
            1e-5);
    }
  };

  SUBCASE("flat layout, separate label gate") {
    auto config = small_config(3, 2.0);
    check_paths(config, 6);
  }
  SUBCASE("flat layout, shared label gate") {
    auto config = small_config(3, 2.0);
    config.label_gate = LabelGateMode::Shared;
    check_paths(config, 6);
  }
  SUBCASE("timeseries layout with shared per-step heads") {
    auto config = small_config(2, 2.0);
    config.layout = FeatureLayout::Timeseries;
    config.step_dim = 3;
    check_paths(config, 6);  // L = 2 steps of width 3
  }
}

TEST_CASE("timeseries layout applies the same heads per step") {
  auto config = small_config(1);
  config.layout = FeatureLayout::Timeseries;
  config.step_dim = 2;
  DataAdapter adapter(config);
  ParamSet psi = adapter.init(29, 4);
  psi.at("feat_w0").values() = {0, 0, 0, 0};
  psi.at("feat_b0").values() = {1.0, -1.0};
  Tensor out = adapter.adapt_feature(psi, Tensor::vector({10, 20, 30, 40}));
  CHECK(out[0] == doctest::Approx(11.0));
  CHECK(out[1] == doctest::Approx(19.0));
  CHECK(out[2] == doctest::Approx(31.0));
  CHECK(out[3] == doctest::Approx(39.0));
}

TEST_CASE("adapter configuration validation") {
  CHECK_THROWS_AS(DataAdapter{DataAdapterConfig{0}}, ConfigError);
  DataAdapterConfig bad_tau;
  bad_tau.temperature = 0.0;
  CHECK_THROWS_AS(DataAdapter{bad_tau}, ConfigError);
  DataAdapterConfig shared_ts;
  shared_ts.label_gate = LabelGateMode::Shared;
  shared_ts.layout = FeatureLayout::Timeseries;
  shared_ts.step_dim = 2;
  CHECK_THROWS_AS(DataAdapter{shared_ts}, ConfigError);
  DataAdapter flat(small_config(2));
  ParamSet psi = flat.init(1, 4);
  CHECK_THROWS_AS(flat.adapt_feature(psi, Tensor::vector({1, 2})), DimensionError);
}
