#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metadapt/data.hpp"
#include "metadapt/tensor.hpp"

namespace metadapt {

enum class DriftMode { Stationary, Gradual, Abrupt, Recurring };

struct SynthConfig {
  std::size_t n_dates = 400;
  std::size_t n_instruments = 50;
  std::size_t feature_dim = 10;
  double noise_std = 0.5;
  DriftMode drift_mode = DriftMode::Stationary;
  double drift_rate = 0.0;         // radians per date (gradual rotation)
  std::size_t switch_period = 20;  // dates between regime switches (abrupt/recurring)
  double signal_norm = 1.0;        // |w_t| — sets the attainable IC ceiling
  double covariate_drift = 0.0;    // feature-mean drift per date along a fixed direction
  std::uint64_t seed = 0;
};

/// A generated stream plus its hidden data-generating record.
struct SynthStream {
  StreamDataset dataset;                 // raw (not normalized)
  std::vector<Tensor> true_weights;      // w_t per date
  SynthConfig config;
};

/// Cross-sectional stream with y = w_t . x + eps and w_t evolving per the
/// configured drift mode. Same seed + config gives a bitwise-identical
/// stream.
SynthStream generate(const SynthConfig& config);

DriftMode parse_drift_mode(const std::string& text);
std::string drift_mode_name(DriftMode mode);

/// Per-task ceiling IC: mean over each task's test dates of the IC achieved
/// by predicting with the true w_t. Upper envelope for any learner.
std::vector<double> oracle_best_ic(const SynthStream& stream, const TaskSchedule& schedule);

}  // namespace metadapt
