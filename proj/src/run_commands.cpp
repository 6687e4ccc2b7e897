#include "metadapt/run_commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "metadapt/checkpoint.hpp"
#include "metadapt/errors.hpp"

namespace metadapt {

namespace fs = std::filesystem;

namespace {

void report_warnings(const std::vector<WarningRecord>& warnings, std::ostream* diagnostics) {
  if (!diagnostics) return;
  for (const auto& w : warnings) {
    *diagnostics << "warn: " << w.source << ": " << w.message << "\n";
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string opt_str(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

void write_effective_config(const AppConfig& config, const std::string& out_dir) {
  auto out = open_out(fs::path(out_dir) / "effective_config.json");
  out << config_to_json(config).dump(2) << "\n";
}

void write_metric_row(std::ofstream& out, const std::string& label, const MetricsSummary& m) {
  out << label << "," << opt_str(m.ic_mean) << "," << opt_str(m.icir) << ","
      << opt_str(m.rank_ic_mean) << "," << opt_str(m.rank_icir) << "," << m.n_dates << "\n";
}

}  // namespace

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

PreparedData prepare_data(const AppConfig& config, std::ostream* diagnostics) {
  std::vector<WarningRecord> warnings;
  StreamDataset raw;
  if (config.data.synth) {
    SynthConfig synth = *config.data.synth;
    synth.seed = config.pipeline.seed;
    raw = generate(synth).dataset;
  } else if (config.data.csv_path) {
    raw = load_csv(*config.data.csv_path, config.data.csv_schema, &warnings);
  } else {
    throw ConfigError("config names neither a CSV path nor a synthetic stream");
  }

  std::int64_t train_end = resolve_date_token(raw, config.schedule.train_end);
  std::int64_t valid_end = resolve_date_token(raw, config.schedule.valid_end);
  PreparedData prepared;
  prepared.dataset = normalize(raw, train_end, &warnings);
  prepared.schedule =
      build_schedule(prepared.dataset, config.pipeline.interval, train_end, valid_end, &warnings);
  report_warnings(warnings, diagnostics);
  return prepared;
}

void cmd_generate(const AppConfig& config, const std::string& out_dir) {
  if (!config.data.synth) throw ConfigError("generate requires a data.synth section");
  ensure_dir(out_dir);
  SynthConfig synth = *config.data.synth;
  synth.seed = config.pipeline.seed;
  SynthStream stream = generate(synth);

  auto out = open_out(fs::path(out_dir) / "stream.csv");
  out << "# seed=" << synth.seed << " drift_mode=" << drift_mode_name(synth.drift_mode)
      << " n_dates=" << synth.n_dates << " n_instruments=" << synth.n_instruments
      << " feature_dim=" << synth.feature_dim << " noise_std=" << format_double(synth.noise_std)
      << " drift_rate=" << format_double(synth.drift_rate)
      << " switch_period=" << synth.switch_period
      << " signal_norm=" << format_double(synth.signal_norm) << "\n";
  out << "date,instrument";
  for (std::size_t j = 0; j < synth.feature_dim; ++j) out << ",f" << j;
  out << ",label\n";
  for (const auto& slice : stream.dataset.slices) {
    for (const auto& sample : slice.samples) {
      out << slice.date_label << "," << sample.instrument_id;
      for (std::size_t j = 0; j < synth.feature_dim; ++j) {
        out << "," << format_double(sample.features[j]);
      }
      out << "," << format_double(sample.label) << "\n";
    }
  }
  write_effective_config(config, out_dir);
}

void write_epoch_log_csv(const std::string& path, const std::vector<EpochLogRow>& log) {
  auto out = open_out(path);
  out << "epoch,phase,train_loss,valid_ic,best\n";
  for (const auto& row : log) {
    out << row.epoch << "," << row.phase << "," << format_double(row.train_loss) << ","
        << opt_str(row.valid_ic) << "," << (row.is_best ? 1 : 0) << "\n";
  }
}

void cmd_pretrain(const AppConfig& config, const std::string& out_dir) {
  ensure_dir(out_dir);
  PreparedData prepared = prepare_data(config, &std::cerr);
  OfflineResult offline = offline_train(config.pipeline, prepared.dataset, prepared.schedule);
  save_param_set((fs::path(out_dir) / "phi.json").string(), offline.phi);
  save_param_set((fs::path(out_dir) / "psi.json").string(), offline.psi);
  write_epoch_log_csv((fs::path(out_dir) / "epoch_log.csv").string(), offline.epoch_log);
  write_effective_config(config, out_dir);
}

void write_report_csv(const std::string& path, const RunReport& report,
                      std::size_t valid_begin_task) {
  (void)valid_begin_task;
  auto out = open_out(path);
  out << "task,split,train_loss,l_mse,l_reg,l_test,l_test_at_phi,coefficient,ic,rank_ic,wall_ms\n";
  for (const auto& task : report.tasks) {
    out << task.task_index << ","
        << (task.task_index >= report.eval_begin_task ? "test" : "valid") << ","
        << format_double(task.train_loss) << "," << format_double(task.losses.l_mse) << ","
        << format_double(task.losses.l_reg) << "," << format_double(task.losses.l_test) << ","
        << opt_str(task.losses.l_test_at_phi) << "," << opt_str(task.losses.adaptive_coefficient)
        << "," << opt_str(task.ic_mean) << "," << opt_str(task.rank_ic_mean) << ","
        << format_double(task.wall_ms) << "\n";
  }
}

void write_predictions_csv(const std::string& path, const RunReport& report) {
  auto out = open_out(path);
  out << "date,instrument,prediction,label\n";
  for (const auto& row : report.predictions) {
    out << row.date << "," << row.instrument << "," << format_double(row.prediction) << ","
        << format_double(row.label) << "\n";
  }
}

void write_metrics_csv(const std::string& path, const RunReport& report,
                       const ShiftPartition& partition) {
  auto out = open_out(path);
  out << "scope,ic_mean,icir,rank_ic_mean,rank_icir,n_dates\n";
  write_metric_row(out, "overall", report.metrics);
  const std::vector<std::pair<std::string, const std::vector<std::size_t>*>> strata = {
      {"gradual", &partition.gradual}, {"middle", &partition.middle}, {"abrupt", &partition.abrupt}};
  for (const auto& [name, tasks] : strata) {
    if (tasks->empty()) {
      out << name << ",,,,,0\n";
      continue;
    }
    write_metric_row(out, name, summarize_tasks(report, *tasks));
  }
}

void cmd_online(const AppConfig& config, const std::string& out_dir,
                const std::string& checkpoint_dir) {
  ensure_dir(out_dir);
  PreparedData prepared = prepare_data(config, &std::cerr);

  RunReport report;
  if (config.pipeline.mode != RunMode::RollingRetrain && !checkpoint_dir.empty()) {
    Engine engine(config.pipeline, prepared.dataset.feature_dim);
    engine.set_phi(load_param_set((fs::path(checkpoint_dir) / "phi.json").string()));
    fs::path psi_path = fs::path(checkpoint_dir) / "psi.json";
    if (fs::exists(psi_path)) engine.set_psi(load_param_set(psi_path.string()));
    report = online_train(engine, prepared.dataset, prepared.schedule);
  } else {
    report = run_pipeline(config.pipeline, prepared.dataset, prepared.schedule);
  }

  std::vector<double> deltas = probe_shift_degrees(config.pipeline, prepared.dataset,
                                                   prepared.schedule);
  ShiftPartition partition = partition_by_shift(deltas);

  write_report_csv((fs::path(out_dir) / "report.csv").string(), report,
                   prepared.schedule.meta_valid_count);
  write_predictions_csv((fs::path(out_dir) / "predictions.csv").string(), report);
  write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), report, partition);
  write_effective_config(config, out_dir);
}

void cmd_ablate(const AppConfig& config, const std::string& out_dir) {
  ensure_dir(out_dir);
  PreparedData prepared = prepare_data(config, &std::cerr);

  std::vector<double> deltas = probe_shift_degrees(config.pipeline, prepared.dataset,
                                                   prepared.schedule);
  ShiftPartition partition = partition_by_shift(deltas);

  struct Variant {
    std::string name;
    PipelineConfig pipeline;
  };
  std::vector<Variant> variants;
  {
    PipelineConfig il = config.pipeline;
    il.mode = RunMode::NaiveIl;
    variants.push_back({"il", il});

    PipelineConfig il_da = config.pipeline;
    il_da.mode = RunMode::DoubleAdapt;
    il_da.meta.eta_phi = 0.0;
    variants.push_back({"il_da", il_da});

    PipelineConfig il_ma = config.pipeline;
    il_ma.mode = RunMode::DoubleAdapt;
    il_ma.meta.eta_psi = 0.0;
    il_ma.adapter_mask = {false, false};
    variants.push_back({"il_ma", il_ma});

    PipelineConfig il_ma_g = config.pipeline;
    il_ma_g.mode = RunMode::DoubleAdapt;
    il_ma_g.adapter_mask = {true, false};
    variants.push_back({"il_ma_g", il_ma_g});

    PipelineConfig il_ma_h = config.pipeline;
    il_ma_h.mode = RunMode::DoubleAdapt;
    il_ma_h.adapter_mask = {false, true};
    variants.push_back({"il_ma_h", il_ma_h});

    PipelineConfig full = config.pipeline;
    full.mode = RunMode::DoubleAdapt;
    variants.push_back({"full", full});
  }

  auto out = open_out(fs::path(out_dir) / "ablation.csv");
  out << "variant,scope,ic_mean,icir,rank_ic_mean,rank_icir,n_dates\n";
  for (const auto& variant : variants) {
    RunReport report = run_pipeline(variant.pipeline, prepared.dataset, prepared.schedule);
    write_metric_row(out, variant.name + ",overall", report.metrics);
    const std::vector<std::pair<std::string, const std::vector<std::size_t>*>> strata = {
        {"gradual", &partition.gradual},
        {"middle", &partition.middle},
        {"abrupt", &partition.abrupt}};
    for (const auto& [name, tasks] : strata) {
      if (tasks->empty()) {
        out << variant.name << "," << name << ",,,,,0\n";
        continue;
      }
      write_metric_row(out, variant.name + "," + name, summarize_tasks(report, *tasks));
    }
  }
  write_effective_config(config, out_dir);
}

void cmd_print_config(const AppConfig& config, std::ostream& out) {
  out << config_to_json(config).dump(2) << "\n";
}

}  // namespace metadapt
