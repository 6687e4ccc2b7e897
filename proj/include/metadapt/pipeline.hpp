#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "metadapt/data.hpp"
#include "metadapt/data_adapter.hpp"
#include "metadapt/meta_optimizer.hpp"
#include "metadapt/metrics.hpp"
#include "metadapt/model.hpp"
#include "metadapt/model_adapter.hpp"

namespace metadapt {

enum class RunMode { DoubleAdapt, NaiveIl, RollingRetrain };

RunMode parse_run_mode(const std::string& text);
std::string run_mode_name(RunMode mode);

struct PipelineConfig {
  std::size_t interval = 20;  // r
  std::uint64_t seed = 0;
  RunMode mode = RunMode::DoubleAdapt;
  std::string backbone = "mlp";
  std::vector<std::size_t> hidden_sizes = {32};
  DataAdapterConfig adapter;
  MetaOptConfig meta;
  double eta_theta = 0.001;
  int inner_steps = 1;
  int patience = 8;  // early-stopping patience (epochs without a new best)
  int max_epochs = 30;
  int pretrain_epochs = 50;  // supervised fit before meta-training; 0 disables
  double pretrain_lr = 0.001;
  int rr_epochs = 5;  // E for the rolling-retrain baseline
  AdapterGradMask adapter_mask;
};

struct PredictionRow {
  std::int64_t date_index = 0;
  std::string date;
  std::string instrument;
  double prediction = 0.0;
  double label = 0.0;
};

struct TaskReport {
  std::size_t task_index = 0;
  double train_loss = 0.0;
  MetaLossBreakdown losses;
  std::vector<PredictionRow> predictions;  // the task's test window
  std::optional<double> ic_mean;           // mean defined IC over the task's test dates
  std::optional<double> rank_ic_mean;
  double wall_ms = 0.0;
};

struct EpochLogRow {
  int epoch = 0;
  std::string phase;  // "fit" or "meta"
  double train_loss = 0.0;
  std::optional<double> valid_ic;
  bool is_best = false;
};

struct RunReport {
  std::vector<TaskReport> tasks;           // every online-processed task, in order
  std::vector<PredictionRow> predictions;  // meta-test rows only
  MetricsSummary metrics;                  // over the meta-test date range
  std::size_t eval_begin_task = 0;         // first meta-test task index
};

TaskData materialize_task(const StreamDataset& ds, const TaskWindow& task);

/// One incremental learner: slow weights, adapter state, upper-level
/// optimizer. A single loop owns an Engine; per-task weights are values.
class Engine {
 public:
  Engine(PipelineConfig config, std::size_t feature_dim);

  const PipelineConfig& config() const { return config_; }
  const ForecastModel& model() const { return *model_; }
  const DataAdapter& adapter() const { return adapter_; }
  const ParamSet& phi() const { return phi_; }
  const ParamSet& psi() const { return psi_; }
  void set_phi(ParamSet phi) { phi_ = std::move(phi); }
  void set_psi(ParamSet psi);

  /// Fresh upper-level Adam states (start of an epoch or of the online phase).
  void reset_meta_states();

  /// Full cycle on one task: adapt incremental data, one-step fine-tune,
  /// predict through the inverse map, then (labels now revealed) update both
  /// meta-learners. Predictions are complete before any test label is read.
  TaskReport run_task(const StreamDataset& ds, const TaskWindow& task);

  /// Steps 1-3 only; sees no test labels (takes label-free features).
  std::vector<double> infer_task(const Tensor& train_features, const Tensor& train_labels,
                                 const Tensor& test_features) const;

 private:
  ParamSet fine_tune(const AdaptedTrainSet& adapted, double* train_loss) const;
  TaskReport run_task_rolling_retrain(const StreamDataset& ds, const TaskWindow& task);

  PipelineConfig config_;
  std::unique_ptr<ForecastModel> model_;
  DataAdapter adapter_;
  ParamSet phi_;
  ParamSet psi_;
  MetaOptimizer meta_;
};

struct OfflineResult {
  ParamSet phi;
  ParamSet psi;
  std::vector<EpochLogRow> epoch_log;
};

/// Supervised fit of the forecast model: per-date Adam minibatches over
/// slices [0, train_slice_end), early stopping on the mean IC over slices
/// [valid_slice_begin, valid_slice_end). Returns the best snapshot.
struct FitResult {
  ParamSet params;
  std::vector<EpochLogRow> log;
};
FitResult fit_model(const ForecastModel& model, ParamSet initial, const StreamDataset& ds,
                    std::size_t train_slice_end, std::size_t valid_slice_begin,
                    std::size_t valid_slice_end, int max_epochs, int patience, double lr,
                    std::uint64_t seed);

/// Offline phase: supervised pretraining, then (doubleadapt mode) epochs of
/// shuffled meta-training with a leakage-safe validation copy and early
/// stopping on validation IC. Returns the best-epoch snapshot.
OfflineResult offline_train(const PipelineConfig& config, const StreamDataset& ds,
                            const TaskSchedule& schedule);

/// Online phase: chronological tasks over meta-valid then meta-test,
/// continually updating; metrics restricted to the meta-test range.
RunReport online_train(Engine& engine, const StreamDataset& ds, const TaskSchedule& schedule);

/// offline_train + online_train under the configured mode.
RunReport run_pipeline(const PipelineConfig& config, const StreamDataset& ds,
                       const TaskSchedule& schedule, OfflineResult* offline_out = nullptr);

RunReport run_baseline_naive_il(PipelineConfig config, const StreamDataset& ds,
                                const TaskSchedule& schedule);
RunReport run_baseline_rolling_retrain(PipelineConfig config, const StreamDataset& ds,
                                       const TaskSchedule& schedule);

/// Shift degrees of the meta-test tasks under the dedicated naive probe
/// (stage-1 pretrained, then carried task to task).
std::vector<double> probe_shift_degrees(const PipelineConfig& config, const StreamDataset& ds,
                                        const TaskSchedule& schedule);

/// Summary over an arbitrary subset of a report's tasks (used for the
/// gradual/middle/abrupt strata).
MetricsSummary summarize_tasks(const RunReport& report, const std::vector<std::size_t>& task_offsets);

}  // namespace metadapt
