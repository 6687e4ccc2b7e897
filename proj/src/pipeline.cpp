#include "metadapt/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "metadapt/errors.hpp"
#include "metadapt/ops.hpp"
#include "metadapt/optim.hpp"
#include "metadapt/rng.hpp"

namespace metadapt {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Tensor slice_features(const DateSlice& slice, std::size_t d) {
  Tensor out = Tensor::zeros({slice.samples.size(), d});
  for (std::size_t s = 0; s < slice.samples.size(); ++s) {
    std::copy(slice.samples[s].features.data(), slice.samples[s].features.data() + d,
              out.data() + s * d);
  }
  return out;
}

Tensor slice_labels(const DateSlice& slice) {
  Tensor out = Tensor::zeros({slice.samples.size()});
  for (std::size_t s = 0; s < slice.samples.size(); ++s) out[s] = slice.samples[s].label;
  return out;
}

/// Per-date IC/RankIC over a set of task reports, chronological.
void collect_series(const std::vector<const TaskReport*>& reports,
                    std::vector<std::optional<double>>& ic_series,
                    std::vector<std::optional<double>>& rank_series) {
  for (const TaskReport* report : reports) {
    std::size_t i = 0;
    const auto& rows = report->predictions;
    while (i < rows.size()) {
      std::size_t j = i;
      while (j < rows.size() && rows[j].date_index == rows[i].date_index) ++j;
      std::vector<double> pred, label;
      pred.reserve(j - i);
      label.reserve(j - i);
      for (std::size_t k = i; k < j; ++k) {
        pred.push_back(rows[k].prediction);
        label.push_back(rows[k].label);
      }
      if (pred.size() >= 2) {
        ic_series.push_back(ic_per_date(Tensor::vector(pred), Tensor::vector(label)));
        rank_series.push_back(rank_ic_per_date(Tensor::vector(pred), Tensor::vector(label)));
      } else {
        ic_series.push_back(std::nullopt);
        rank_series.push_back(std::nullopt);
      }
      i = j;
    }
  }
}

std::optional<double> mean_defined(const std::vector<std::optional<double>>& series) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& v : series) {
    if (v) {
      acc += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return acc / static_cast<double>(n);
}

}  // namespace

RunMode parse_run_mode(const std::string& text) {
  if (text == "doubleadapt") return RunMode::DoubleAdapt;
  if (text == "naive_il") return RunMode::NaiveIl;
  if (text == "rolling_retrain") return RunMode::RollingRetrain;
  throw ConfigError("unknown mode '" + text + "' (expected doubleadapt, naive_il or rolling_retrain)");
}

std::string run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::DoubleAdapt: return "doubleadapt";
    case RunMode::NaiveIl: return "naive_il";
    case RunMode::RollingRetrain: return "rolling_retrain";
  }
  return "doubleadapt";
}

TaskData materialize_task(const StreamDataset& ds, const TaskWindow& task) {
  TaskData data;
  data.train_features = features_matrix(ds, task.train_begin, task.train_end);
  data.train_labels = labels_vector(ds, task.train_begin, task.train_end);
  data.test_features = features_matrix(ds, task.test_begin, task.test_end);
  data.test_labels = labels_vector(ds, task.test_begin, task.test_end);
  return data;
}

Engine::Engine(PipelineConfig config, std::size_t feature_dim)
    : config_(std::move(config)),
      model_(make_model(config_.backbone, config_.hidden_sizes)),
      adapter_(config_.adapter),
      meta_(config_.meta) {
  phi_ = model_->init(substream_seed(config_.seed, "init"), feature_dim);
  psi_ = adapter_.init(substream_seed(config_.seed, "init"), feature_dim);
  reset_meta_states();
}

void Engine::set_psi(ParamSet psi) {
  psi_ = std::move(psi);
  adapter_.project_gamma(psi_);
}

void Engine::reset_meta_states() { meta_.reset_states(phi_, psi_); }

ParamSet Engine::fine_tune(const AdaptedTrainSet& adapted, double* train_loss) const {
  ModelAdapterState ma{phi_.clone(), config_.eta_theta, config_.inner_steps};
  LowerLevelResult result = lower_level_update(ma, *model_, adapted);
  if (train_loss) *train_loss = result.train_loss;
  return std::move(result.theta);
}

std::vector<double> Engine::infer_task(const Tensor& train_features, const Tensor& train_labels,
                                       const Tensor& test_features) const {
  const bool plain = config_.mode == RunMode::NaiveIl;
  AdaptedTrainSet adapted_train =
      plain ? AdaptedTrainSet{train_features, train_labels}
            : adapt_train_set(adapter_, psi_, train_features, train_labels);
  ParamSet theta = fine_tune(adapted_train, nullptr);
  if (plain) {
    Tensor out = model_->predict(theta, test_features);
    return {out.values().begin(), out.values().end()};
  }
  AdaptedTestFeatures adapted_test = adapt_test_features(adapter_, psi_, test_features);
  Tensor intermediate = model_->predict(theta, adapted_test.features);
  std::vector<double> predictions(intermediate.numel());
  const std::size_t d = test_features.dim(1);
  for (std::size_t s = 0; s < intermediate.numel(); ++s) {
    Tensor raw = Tensor::vector(std::vector<double>(test_features.data() + s * d,
                                                    test_features.data() + (s + 1) * d));
    predictions[s] = adapter_.invert_prediction(psi_, raw, intermediate[s]);
  }
  return predictions;
}

TaskReport Engine::run_task(const StreamDataset& ds, const TaskWindow& task) {
  if (config_.mode == RunMode::RollingRetrain) return run_task_rolling_retrain(ds, task);

  auto start = Clock::now();
  TaskReport report;
  report.task_index = task.task_index;

  Tensor train_features = features_matrix(ds, task.train_begin, task.train_end);
  Tensor train_labels = labels_vector(ds, task.train_begin, task.train_end);
  Tensor test_features = features_matrix(ds, task.test_begin, task.test_end);

  const bool plain = config_.mode == RunMode::NaiveIl;
  AdaptedTrainSet adapted_train =
      plain ? AdaptedTrainSet{train_features, train_labels}
            : adapt_train_set(adapter_, psi_, train_features, train_labels);
  ParamSet theta = fine_tune(adapted_train, &report.train_loss);

  std::vector<double> predictions;
  if (plain) {
    Tensor out = model_->predict(theta, test_features);
    predictions.assign(out.values().begin(), out.values().end());
  } else {
    AdaptedTestFeatures adapted_test = adapt_test_features(adapter_, psi_, test_features);
    Tensor intermediate = model_->predict(theta, adapted_test.features);
    const std::size_t d = test_features.dim(1);
    predictions.resize(intermediate.numel());
    for (std::size_t s = 0; s < intermediate.numel(); ++s) {
      Tensor raw = Tensor::vector(std::vector<double>(test_features.data() + s * d,
                                                      test_features.data() + (s + 1) * d));
      predictions[s] = adapter_.invert_prediction(psi_, raw, intermediate[s]);
    }
  }

  // Predictions are stored; only now are the test labels read.
  std::size_t row = 0;
  for (std::size_t i = task.test_begin; i < task.test_end; ++i) {
    for (const auto& sample : ds.slices[i].samples) {
      report.predictions.push_back({sample.date_index, ds.slices[i].date_label,
                                    sample.instrument_id, predictions[row], sample.label});
      ++row;
    }
  }
  Tensor test_labels = labels_vector(ds, task.test_begin, task.test_end);

  if (plain) {
    report.losses.l_mse = mse(Tensor::vector(predictions), test_labels);
    report.losses.l_test = report.losses.l_mse;
  } else {
    TaskData data{std::move(train_features), std::move(train_labels), std::move(test_features),
                  std::move(test_labels)};
    const ParamSet* phi_ref =
        config_.meta.reg_mode == RegMode::Adaptive ? &phi_ : nullptr;
    TaskGradients grads = evaluate_task(adapter_, psi_, *model_, theta, data, config_.meta, phi_ref);
    report.losses = grads.losses;
    psi_ = meta_.update_data_adapter(adapter_, psi_, grads, config_.adapter_mask);
    phi_ = meta_.update_model_adapter(phi_, grads.theta_grads);
  }

  std::vector<std::optional<double>> ic_series, rank_series;
  collect_series({&report}, ic_series, rank_series);
  report.ic_mean = mean_defined(ic_series);
  report.rank_ic_mean = mean_defined(rank_series);
  report.wall_ms = elapsed_ms(start);
  return report;
}

TaskReport Engine::run_task_rolling_retrain(const StreamDataset& ds, const TaskWindow& task) {
  auto start = Clock::now();
  TaskReport report;
  report.task_index = task.task_index;

  // Retrain from scratch on everything up to the task's train-window end.
  ParamSet theta = model_->init(
      substream_seed(config_.seed, "rr_init_" + std::to_string(task.task_index)),
      ds.feature_dim);
  AdamState state = AdamState::init(theta);
  std::vector<std::size_t> order(task.train_end);
  std::iota(order.begin(), order.end(), 0);
  double last_epoch_loss = 0.0;
  for (int epoch = 0; epoch < config_.rr_epochs; ++epoch) {
    auto rng = substream(config_.seed, "rr_shuffle_" + std::to_string(task.task_index) + "_" +
                                            std::to_string(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double acc = 0.0;
    for (std::size_t idx : order) {
      const DateSlice& slice = ds.slices[idx];
      auto [loss, grads] =
          model_->loss_and_grads(theta, slice_features(slice, ds.feature_dim), slice_labels(slice));
      acc += loss;
      auto [next, next_state] = adam_step(theta, grads, state, config_.pretrain_lr);
      theta = std::move(next);
      state = std::move(next_state);
    }
    last_epoch_loss = acc / static_cast<double>(order.size());
  }
  report.train_loss = last_epoch_loss;

  Tensor test_features = features_matrix(ds, task.test_begin, task.test_end);
  Tensor out = model_->predict(theta, test_features);
  std::size_t row = 0;
  for (std::size_t i = task.test_begin; i < task.test_end; ++i) {
    for (const auto& sample : ds.slices[i].samples) {
      report.predictions.push_back({sample.date_index, ds.slices[i].date_label,
                                    sample.instrument_id, out[row], sample.label});
      ++row;
    }
  }
  Tensor test_labels = labels_vector(ds, task.test_begin, task.test_end);
  report.losses.l_mse = mse(out, test_labels);
  report.losses.l_test = report.losses.l_mse;

  std::vector<std::optional<double>> ic_series, rank_series;
  collect_series({&report}, ic_series, rank_series);
  report.ic_mean = mean_defined(ic_series);
  report.rank_ic_mean = mean_defined(rank_series);
  report.wall_ms = elapsed_ms(start);
  return report;
}

FitResult fit_model(const ForecastModel& model, ParamSet initial, const StreamDataset& ds,
                    std::size_t train_slice_end, std::size_t valid_slice_begin,
                    std::size_t valid_slice_end, int max_epochs, int patience, double lr,
                    std::uint64_t seed) {
  FitResult result;
  result.params = std::move(initial);
  if (max_epochs <= 0) return result;
  if (train_slice_end == 0 || train_slice_end > ds.n_dates()) {
    throw DataError("fit_model: empty or out-of-range training window");
  }

  ParamSet params = result.params.clone();
  AdamState state = AdamState::init(params);
  std::vector<std::size_t> order(train_slice_end);
  std::iota(order.begin(), order.end(), 0);

  const bool has_valid = valid_slice_begin < valid_slice_end;
  double best_ic = -std::numeric_limits<double>::infinity();
  int bad_streak = 0;

  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    auto rng = substream(seed, "fit_shuffle_" + std::to_string(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double acc = 0.0;
    for (std::size_t idx : order) {
      const DateSlice& slice = ds.slices[idx];
      auto [loss, grads] =
          model.loss_and_grads(params, slice_features(slice, ds.feature_dim), slice_labels(slice));
      acc += loss;
      auto [next, next_state] = adam_step(params, grads, state, lr);
      params = std::move(next);
      state = std::move(next_state);
    }

    EpochLogRow row;
    row.epoch = epoch;
    row.phase = "fit";
    row.train_loss = acc / static_cast<double>(order.size());
    if (has_valid) {
      std::vector<std::optional<double>> ics;
      for (std::size_t i = valid_slice_begin; i < valid_slice_end; ++i) {
        const DateSlice& slice = ds.slices[i];
        if (slice.samples.size() < 2) continue;
        Tensor pred = model.predict(params, slice_features(slice, ds.feature_dim));
        ics.push_back(ic_per_date(pred, slice_labels(slice)));
      }
      row.valid_ic = mean_defined(ics);
      double ic = row.valid_ic.value_or(-std::numeric_limits<double>::infinity());
      if (ic > best_ic) {
        best_ic = ic;
        result.params = params.clone();
        bad_streak = 0;
        row.is_best = true;
      } else {
        ++bad_streak;
      }
      result.log.push_back(row);
      if (bad_streak >= patience) break;
    } else {
      result.params = params.clone();
      row.is_best = true;
      result.log.push_back(row);
    }
  }
  return result;
}

OfflineResult offline_train(const PipelineConfig& config, const StreamDataset& ds,
                            const TaskSchedule& schedule) {
  if (schedule.meta_train_count == 0) throw ScheduleError("offline_train: no meta-train tasks");

  Engine engine(config, ds.feature_dim);
  OfflineResult result;
  result.psi = engine.psi().clone();

  const std::size_t train_end_slice = schedule.tasks[schedule.meta_train_count - 1].test_end;
  const std::size_t valid_end_slice = schedule.tasks[schedule.meta_valid_count - 1].test_end;

  // Stage 1: plain supervised pretraining of the forecast model.
  if (config.pretrain_epochs > 0) {
    FitResult fit = fit_model(engine.model(), engine.phi().clone(), ds, train_end_slice,
                              train_end_slice, valid_end_slice, config.pretrain_epochs,
                              config.patience, config.pretrain_lr, config.seed);
    engine.set_phi(fit.params.clone());
    result.epoch_log = std::move(fit.log);
  }
  result.phi = engine.phi().clone();

  if (config.mode != RunMode::DoubleAdapt || config.max_epochs <= 0) return result;

  // Stage 2: meta-training epochs with shuffled task order, leakage-safe
  // validation on a deep copy, early stopping on validation IC.
  std::vector<std::size_t> train_tasks(schedule.meta_train_count);
  std::iota(train_tasks.begin(), train_tasks.end(), 0);

  double best_ic = -std::numeric_limits<double>::infinity();
  int bad_streak = 0;
  ParamSet best_phi = engine.phi().clone();
  ParamSet best_psi = engine.psi().clone();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    engine.reset_meta_states();
    auto rng = substream(config.seed, "shuffle_" + std::to_string(epoch));
    std::shuffle(train_tasks.begin(), train_tasks.end(), rng);

    double acc = 0.0;
    for (std::size_t k : train_tasks) {
      TaskReport report = engine.run_task(ds, schedule.tasks[k]);
      acc += report.train_loss;
    }

    // Validation pass runs on a copy; the main state is untouched.
    Engine probe(config, ds.feature_dim);
    probe.set_phi(engine.phi().clone());
    probe.set_psi(engine.psi().clone());
    probe.reset_meta_states();
    std::vector<std::optional<double>> ic_series, rank_series;
    std::vector<TaskReport> valid_reports;
    for (std::size_t k = schedule.meta_train_count; k < schedule.meta_valid_count; ++k) {
      valid_reports.push_back(probe.run_task(ds, schedule.tasks[k]));
    }
    std::vector<const TaskReport*> refs;
    for (const auto& r : valid_reports) refs.push_back(&r);
    collect_series(refs, ic_series, rank_series);

    EpochLogRow row;
    row.epoch = epoch;
    row.phase = "meta";
    row.train_loss = acc / static_cast<double>(train_tasks.size());
    row.valid_ic = mean_defined(ic_series);

    double ic = row.valid_ic.value_or(-std::numeric_limits<double>::infinity());
    if (ic > best_ic) {
      best_ic = ic;
      best_phi = engine.phi().clone();
      best_psi = engine.psi().clone();
      bad_streak = 0;
      row.is_best = true;
    } else {
      ++bad_streak;
    }
    result.epoch_log.push_back(row);
    if (bad_streak >= config.patience) break;
  }

  result.phi = std::move(best_phi);
  result.psi = std::move(best_psi);
  return result;
}

RunReport online_train(Engine& engine, const StreamDataset& ds, const TaskSchedule& schedule) {
  RunReport report;
  report.eval_begin_task = schedule.meta_valid_count;
  engine.reset_meta_states();

  for (std::size_t k = schedule.meta_train_count; k < schedule.n_tasks(); ++k) {
    report.tasks.push_back(engine.run_task(ds, schedule.tasks[k]));
  }

  std::vector<const TaskReport*> test_reports;
  for (const auto& task : report.tasks) {
    if (task.task_index >= schedule.meta_valid_count) {
      test_reports.push_back(&task);
      report.predictions.insert(report.predictions.end(), task.predictions.begin(),
                                task.predictions.end());
    }
  }
  std::vector<std::optional<double>> ic_series, rank_series;
  collect_series(test_reports, ic_series, rank_series);
  report.metrics = summarize(std::move(ic_series), std::move(rank_series));
  return report;
}

RunReport run_pipeline(const PipelineConfig& config, const StreamDataset& ds,
                       const TaskSchedule& schedule, OfflineResult* offline_out) {
  Engine engine(config, ds.feature_dim);
  if (config.mode != RunMode::RollingRetrain) {
    OfflineResult offline = offline_train(config, ds, schedule);
    engine.set_phi(offline.phi.clone());
    engine.set_psi(offline.psi.clone());
    if (offline_out) *offline_out = std::move(offline);
  }
  return online_train(engine, ds, schedule);
}

RunReport run_baseline_naive_il(PipelineConfig config, const StreamDataset& ds,
                                const TaskSchedule& schedule) {
  config.mode = RunMode::NaiveIl;
  return run_pipeline(config, ds, schedule);
}

RunReport run_baseline_rolling_retrain(PipelineConfig config, const StreamDataset& ds,
                                       const TaskSchedule& schedule) {
  config.mode = RunMode::RollingRetrain;
  return run_pipeline(config, ds, schedule);
}

std::vector<double> probe_shift_degrees(const PipelineConfig& config, const StreamDataset& ds,
                                        const TaskSchedule& schedule) {
  auto model = make_model(config.backbone, config.hidden_sizes);
  ParamSet initial = model->init(substream_seed(config.seed, "init"), ds.feature_dim);

  const std::size_t train_end_slice = schedule.tasks[schedule.meta_train_count - 1].test_end;
  const std::size_t valid_end_slice = schedule.tasks[schedule.meta_valid_count - 1].test_end;
  FitResult fit = fit_model(*model, std::move(initial), ds, train_end_slice, train_end_slice,
                            valid_end_slice, config.pretrain_epochs, config.patience,
                            config.pretrain_lr, config.seed);

  ShiftProbe probe(*model, std::move(fit.params), config.eta_theta, config.inner_steps);
  std::vector<double> deltas;
  for (std::size_t k = schedule.meta_train_count; k < schedule.n_tasks(); ++k) {
    double delta = probe.shift_degree(materialize_task(ds, schedule.tasks[k]));
    if (k >= schedule.meta_valid_count) deltas.push_back(delta);
  }
  return deltas;
}

MetricsSummary summarize_tasks(const RunReport& report,
                               const std::vector<std::size_t>& task_offsets) {
  std::vector<const TaskReport*> refs;
  for (const auto& task : report.tasks) {
    if (task.task_index < report.eval_begin_task) continue;
    std::size_t offset = task.task_index - report.eval_begin_task;
    if (std::find(task_offsets.begin(), task_offsets.end(), offset) != task_offsets.end()) {
      refs.push_back(&task);
    }
  }
  std::vector<std::optional<double>> ic_series, rank_series;
  collect_series(refs, ic_series, rank_series);
  return summarize(std::move(ic_series), std::move(rank_series));
}

}  // namespace metadapt
