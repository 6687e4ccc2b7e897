#pragma once

#include <ostream>
#include <string>

#include "metadapt/config.hpp"
#include "metadapt/pipeline.hpp"

namespace metadapt {

/// Normalized dataset + schedule resolved from a config (synth or CSV).
struct PreparedData {
  StreamDataset dataset;
  TaskSchedule schedule;
};

PreparedData prepare_data(const AppConfig& config, std::ostream* diagnostics = nullptr);

/// Emits the configured synthetic stream as stream.csv (raw values, seed
/// echoed in the metadata header) plus the effective config.
void cmd_generate(const AppConfig& config, const std::string& out_dir);

/// Offline phase; writes phi.json / psi.json checkpoints and epoch_log.csv.
void cmd_pretrain(const AppConfig& config, const std::string& out_dir);

/// Online phase from checkpoints (or from a fresh offline pass when
/// checkpoint_dir is empty); writes report.csv, predictions.csv, metrics.csv.
void cmd_online(const AppConfig& config, const std::string& out_dir,
                const std::string& checkpoint_dir = "");

/// Component grid on a shared stream/seed with shift-stratified reporting;
/// writes ablation.csv.
void cmd_ablate(const AppConfig& config, const std::string& out_dir);

void cmd_print_config(const AppConfig& config, std::ostream& out);

/// Run-report writers, shared between cmd_online and the test suites.
void write_report_csv(const std::string& path, const RunReport& report,
                      std::size_t valid_begin_task);
void write_predictions_csv(const std::string& path, const RunReport& report);
void write_metrics_csv(const std::string& path, const RunReport& report,
                       const ShiftPartition& partition);
void write_epoch_log_csv(const std::string& path, const std::vector<EpochLogRow>& log);

/// Deterministic shortest-precision float formatting used in every CSV.
std::string format_double(double value);

}  // namespace metadapt
