#include "metadapt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metadapt/errors.hpp"
#include "metadapt/ops.hpp"
#include "metadapt/optim.hpp"

namespace metadapt {

namespace {

std::optional<double> pearson(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.numel();
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= static_cast<double>(n);
  mean_b /= static_cast<double>(n);
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double da = a[i] - mean_a, db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) return std::nullopt;
  return std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
}

struct SeriesStats {
  std::optional<double> mean;
  std::optional<double> ir;  // mean / population std
  std::size_t n_valid = 0;
};

SeriesStats series_stats(const std::vector<std::optional<double>>& series) {
  SeriesStats stats;
  double sum = 0.0;
  for (const auto& v : series) {
    if (!v) continue;
    sum += *v;
    ++stats.n_valid;
  }
  if (stats.n_valid == 0) return stats;
  double mean = sum / static_cast<double>(stats.n_valid);
  stats.mean = mean;
  double var = 0.0;
  for (const auto& v : series) {
    if (!v) continue;
    double d = *v - mean;
    var += d * d;
  }
  double stddev = std::sqrt(var / static_cast<double>(stats.n_valid));
  if (stats.n_valid >= 2 && stddev > 0.0) stats.ir = mean / stddev;
  return stats;
}

}  // namespace

std::optional<double> ic_per_date(const Tensor& predictions, const Tensor& labels,
                                  std::vector<WarningRecord>* warnings) {
  require_same_shape(predictions, labels, "ic_per_date");
  if (predictions.numel() < 2) throw DataError("ic_per_date: need at least 2 samples");
  auto r = pearson(predictions, labels);
  if (!r && warnings) {
    warnings->push_back({"ic_per_date", "constant cross-section; IC undefined for this date"});
  }
  return r;
}

std::vector<double> midranks(const Tensor& values) {
  const std::size_t n = values.numel();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // average of 1-based positions
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> rank_ic_per_date(const Tensor& predictions, const Tensor& labels,
                                       std::vector<WarningRecord>* warnings) {
  require_same_shape(predictions, labels, "rank_ic_per_date");
  if (predictions.numel() < 2) throw DataError("rank_ic_per_date: need at least 2 samples");
  Tensor pred_ranks = Tensor::vector(midranks(predictions));
  Tensor label_ranks = Tensor::vector(midranks(labels));
  auto r = pearson(pred_ranks, label_ranks);
  if (!r && warnings) {
    warnings->push_back({"rank_ic_per_date", "constant ranks; RankIC undefined for this date"});
  }
  return r;
}

MetricsSummary summarize(std::vector<std::optional<double>> ic_series,
                         std::vector<std::optional<double>> rank_ic_series) {
  MetricsSummary summary;
  summary.ic_series = std::move(ic_series);
  summary.rank_ic_series = std::move(rank_ic_series);

  SeriesStats ic = series_stats(summary.ic_series);
  if (ic.n_valid == 0) throw DataError("summarize: no dates with a defined IC");
  summary.ic_mean = ic.mean;
  summary.icir = ic.ir;
  summary.n_dates = ic.n_valid;

  SeriesStats rank = series_stats(summary.rank_ic_series);
  summary.rank_ic_mean = rank.mean;
  summary.rank_icir = rank.ir;
  return summary;
}

ShiftPartition partition_by_shift(const std::vector<double>& delta_losses) {
  ShiftPartition partition;
  partition.delta_losses = delta_losses;
  const std::size_t n = delta_losses.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (delta_losses[i] != delta_losses[j]) return delta_losses[i] < delta_losses[j];
    return i < j;
  });
  const std::size_t quartile = n / 4;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < quartile) {
      partition.gradual.push_back(order[i]);
    } else if (i >= n - quartile && quartile > 0) {
      partition.abrupt.push_back(order[i]);
    } else {
      partition.middle.push_back(order[i]);
    }
  }
  std::sort(partition.gradual.begin(), partition.gradual.end());
  std::sort(partition.middle.begin(), partition.middle.end());
  std::sort(partition.abrupt.begin(), partition.abrupt.end());
  return partition;
}

ShiftProbe::ShiftProbe(const ForecastModel& model, ParamSet initial_params, double eta, int steps)
    : model_(model), params_(std::move(initial_params)), eta_(eta), steps_(steps) {
  if (steps_ < 1) throw ConfigError("shift probe: steps must be >= 1");
}

double ShiftProbe::shift_degree(const TaskData& task) {
  Tensor before = model_.predict(params_, task.test_features);
  double l1 = mse(before, task.test_labels);
  for (int s = 0; s < steps_; ++s) {
    auto [loss, grads] = model_.loss_and_grads(params_, task.train_features, task.train_labels);
    (void)loss;
    params_ = sgd_step(params_, grads, eta_);
  }
  Tensor after = model_.predict(params_, task.test_features);
  double l2 = mse(after, task.test_labels);
  return l2 - l1;
}

}  // namespace metadapt
