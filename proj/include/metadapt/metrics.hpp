#pragma once

#include <optional>
#include <vector>

#include "metadapt/data.hpp"
#include "metadapt/meta_optimizer.hpp"
#include "metadapt/model.hpp"
#include "metadapt/tensor.hpp"

namespace metadapt {

/// Cross-sectional ranking metrics aggregated over dates. Null entries mark
/// dates where the correlation is undefined (constant cross-section); they
/// are excluded from both the mean and the dispersion, never propagated as
/// NaN.
struct MetricsSummary {
  std::optional<double> ic_mean;
  std::optional<double> icir;
  std::optional<double> rank_ic_mean;
  std::optional<double> rank_icir;
  std::vector<std::optional<double>> ic_series;
  std::vector<std::optional<double>> rank_ic_series;
  std::size_t n_dates = 0;  // dates with a defined IC
};

/// Pearson correlation across one date's cross-section; null when either
/// vector is constant.
std::optional<double> ic_per_date(const Tensor& predictions, const Tensor& labels,
                                  std::vector<WarningRecord>* warnings = nullptr);

/// Spearman correlation with midranks for ties.
std::optional<double> rank_ic_per_date(const Tensor& predictions, const Tensor& labels,
                                       std::vector<WarningRecord>* warnings = nullptr);

/// Average ranks (1-based) with midranks for ties.
std::vector<double> midranks(const Tensor& values);

/// Means and mean/std ratios over the defined dates of both series.
MetricsSummary summarize(std::vector<std::optional<double>> ic_series,
                         std::vector<std::optional<double>> rank_ic_series);

/// Quartile split of tasks by their shift degree. gradual holds the
/// floor(0.25 n) smallest, abrupt the floor(0.25 n) largest; ties resolve
/// by task index, earlier first.
struct ShiftPartition {
  std::vector<double> delta_losses;
  std::vector<std::size_t> gradual;
  std::vector<std::size_t> middle;
  std::vector<std::size_t> abrupt;
};

ShiftPartition partition_by_shift(const std::vector<double>& delta_losses);

/// Stateful shift-degree probe: a plain incremental learner whose test-error
/// change under a naive update measures how far the test window drifted from
/// the train window. The post-update state carries forward to the next task.
class ShiftProbe {
 public:
  ShiftProbe(const ForecastModel& model, ParamSet initial_params, double eta, int steps);

  /// L2 - L1: test MSE after the naive update minus before it.
  double shift_degree(const TaskData& task);

  const ParamSet& params() const { return params_; }

 private:
  const ForecastModel& model_;
  ParamSet params_;
  double eta_;
  int steps_;
};

}  // namespace metadapt
