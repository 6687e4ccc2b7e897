#include "metadapt/synth.hpp"

#include <cmath>

#include "metadapt/errors.hpp"
#include "metadapt/metrics.hpp"
#include "metadapt/ops.hpp"
#include "metadapt/rng.hpp"

namespace metadapt {

namespace {

Tensor gaussian_vector(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t = Tensor::zeros({d});
  for (std::size_t i = 0; i < d; ++i) t[i] = dist(rng);
  return t;
}

Tensor unit_vector(std::mt19937_64& rng, std::size_t d) {
  Tensor v = gaussian_vector(rng, d);
  double n = norm2(v);
  for (std::size_t i = 0; i < d; ++i) v[i] /= n;
  return v;
}

void validate(const SynthConfig& c) {
  if (c.n_dates < 2 || c.n_instruments < 1 || c.feature_dim < 1) {
    throw ConfigError("synth: n_dates, n_instruments and feature_dim must be positive");
  }
  if (c.noise_std < 0.0 || c.drift_rate < 0.0 || c.signal_norm <= 0.0) {
    throw ConfigError("synth: noise_std/drift_rate must be >= 0 and signal_norm > 0");
  }
  if ((c.drift_mode == DriftMode::Abrupt || c.drift_mode == DriftMode::Recurring) &&
      c.switch_period < 1) {
    throw ConfigError("synth: switch_period must be >= 1 for abrupt/recurring drift");
  }
}

std::string instrument_name(std::size_t s) {
  std::string id = std::to_string(s);
  while (id.size() < 3) id = "0" + id;
  return "s" + id;
}

}  // namespace

DriftMode parse_drift_mode(const std::string& text) {
  if (text == "stationary") return DriftMode::Stationary;
  if (text == "gradual") return DriftMode::Gradual;
  if (text == "abrupt") return DriftMode::Abrupt;
  if (text == "recurring") return DriftMode::Recurring;
  throw ConfigError("unknown drift mode '" + text + "'");
}

std::string drift_mode_name(DriftMode mode) {
  switch (mode) {
    case DriftMode::Stationary: return "stationary";
    case DriftMode::Gradual: return "gradual";
    case DriftMode::Abrupt: return "abrupt";
    case DriftMode::Recurring: return "recurring";
  }
  return "stationary";
}

SynthStream generate(const SynthConfig& config) {
  validate(config);
  const std::size_t d = config.feature_dim;

  auto w_rng = substream(config.seed, "synth_w");
  Tensor primary = unit_vector(w_rng, d);

  // Per-date ground truth weights.
  std::vector<Tensor> weights(config.n_dates, Tensor::zeros({d}));
  switch (config.drift_mode) {
    case DriftMode::Stationary: {
      for (std::size_t t = 0; t < config.n_dates; ++t) {
        for (std::size_t i = 0; i < d; ++i) weights[t][i] = config.signal_norm * primary[i];
      }
      break;
    }
    case DriftMode::Gradual: {
      // Rotate in the plane spanned by `primary` and an orthonormal partner.
      Tensor partner = gaussian_vector(w_rng, d);
      double proj = dot(partner, primary);
      for (std::size_t i = 0; i < d; ++i) partner[i] -= proj * primary[i];
      double n = norm2(partner);
      if (n == 0.0) throw ConfigError("synth: degenerate rotation plane (feature_dim too small?)");
      for (std::size_t i = 0; i < d; ++i) partner[i] /= n;
      for (std::size_t t = 0; t < config.n_dates; ++t) {
        double angle = config.drift_rate * static_cast<double>(t);
        double c = std::cos(angle), s = std::sin(angle);
        for (std::size_t i = 0; i < d; ++i) {
          weights[t][i] = config.signal_norm * (c * primary[i] + s * partner[i]);
        }
      }
      break;
    }
    case DriftMode::Abrupt: {
      Tensor regime = primary;
      for (std::size_t t = 0; t < config.n_dates; ++t) {
        if (t > 0 && t % config.switch_period == 0) regime = unit_vector(w_rng, d);
        for (std::size_t i = 0; i < d; ++i) weights[t][i] = config.signal_norm * regime[i];
      }
      break;
    }
    case DriftMode::Recurring: {
      Tensor alternate = unit_vector(w_rng, d);
      for (std::size_t t = 0; t < config.n_dates; ++t) {
        const Tensor& regime = (t / config.switch_period) % 2 == 0 ? primary : alternate;
        for (std::size_t i = 0; i < d; ++i) weights[t][i] = config.signal_norm * regime[i];
      }
      break;
    }
  }

  Tensor mean_direction = Tensor::zeros({d});
  if (config.covariate_drift != 0.0) {
    auto m_rng = substream(config.seed, "synth_mean");
    mean_direction = unit_vector(m_rng, d);
  }

  auto x_rng = substream(config.seed, "synth_x");
  auto e_rng = substream(config.seed, "synth_eps");
  std::normal_distribution<double> feature_dist(0.0, 1.0);
  std::normal_distribution<double> noise_dist(0.0, 1.0);

  SynthStream stream;
  stream.config = config;
  stream.true_weights = weights;
  stream.dataset.feature_dim = d;
  stream.dataset.slices.reserve(config.n_dates);

  for (std::size_t t = 0; t < config.n_dates; ++t) {
    DateSlice slice;
    slice.date_index = static_cast<std::int64_t>(t);
    slice.date_label = std::to_string(t);
    slice.samples.reserve(config.n_instruments);
    double mean_scale = config.covariate_drift * static_cast<double>(t);
    for (std::size_t s = 0; s < config.n_instruments; ++s) {
      Sample sample;
      sample.date_index = slice.date_index;
      sample.instrument_id = instrument_name(s);
      Tensor x = Tensor::zeros({d});
      for (std::size_t i = 0; i < d; ++i) {
        x[i] = feature_dist(x_rng) + mean_scale * mean_direction[i];
      }
      double y = dot(weights[t], x);
      if (config.noise_std > 0.0) y += config.noise_std * noise_dist(e_rng);
      sample.features = std::move(x);
      sample.label = y;
      slice.samples.push_back(std::move(sample));
    }
    stream.dataset.slices.push_back(std::move(slice));
  }
  return stream;
}

std::vector<double> oracle_best_ic(const SynthStream& stream, const TaskSchedule& schedule) {
  std::vector<double> ceiling;
  ceiling.reserve(schedule.n_tasks());
  for (const auto& task : schedule.tasks) {
    std::vector<std::optional<double>> per_date;
    for (std::size_t slice_idx = task.test_begin; slice_idx < task.test_end; ++slice_idx) {
      const auto& slice = stream.dataset.slices[slice_idx];
      const Tensor& w = stream.true_weights[static_cast<std::size_t>(slice.date_index)];
      Tensor pred = Tensor::zeros({slice.samples.size()});
      Tensor label = Tensor::zeros({slice.samples.size()});
      for (std::size_t s = 0; s < slice.samples.size(); ++s) {
        pred[s] = dot(w, slice.samples[s].features);
        label[s] = slice.samples[s].label;
      }
      per_date.push_back(ic_per_date(pred, label));
    }
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& v : per_date) {
      if (v) {
        acc += *v;
        ++n;
      }
    }
    ceiling.push_back(n > 0 ? acc / static_cast<double>(n) : 0.0);
  }
  return ceiling;
}

}  // namespace metadapt
