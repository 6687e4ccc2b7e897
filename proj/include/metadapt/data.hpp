#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metadapt/tensor.hpp"

namespace metadapt {

/// One instrument at one date: normalized features plus the normalized
/// next-step change-rate label.
struct Sample {
  std::int64_t date_index = 0;
  std::string instrument_id;
  Tensor features;
  double label = 0.0;
};

/// All instruments observed at one date. Instrument ids are unique within
/// the slice; slice sizes may vary date to date.
struct DateSlice {
  std::int64_t date_index = 0;
  std::string date_label;
  std::vector<Sample> samples;
};

struct FeatureMoments {
  std::vector<double> mean;
  std::vector<double> stddev;  // population std; 0 marks a constant column
};

struct WarningRecord {
  std::string source;
  std::string message;
};

/// Immutable after construction; slices are strictly increasing in date.
struct StreamDataset {
  std::vector<DateSlice> slices;
  std::size_t feature_dim = 0;
  std::optional<FeatureMoments> feature_moments;
  bool normalized = false;

  std::size_t n_dates() const { return slices.size(); }
  std::size_t total_samples() const;
};

/// One incremental-learning task: r train dates immediately followed by
/// r test dates, expressed as half-open slice-index ranges into the owning
/// dataset. Consecutive tasks share slices (test of k == train of k+1).
struct TaskWindow {
  std::size_t task_index = 0;
  std::size_t train_begin = 0;
  std::size_t train_end = 0;  // == test_begin
  std::size_t test_begin = 0;
  std::size_t test_end = 0;
};

struct TaskSchedule {
  std::size_t interval = 0;  // r
  std::vector<TaskWindow> tasks;
  std::size_t meta_train_count = 0;  // K0
  std::size_t meta_valid_count = 0;  // K (end of meta-valid, exclusive)

  std::size_t n_tasks() const { return tasks.size(); }
};

enum class CsvSchema { Features, Price };

/// Parses `date,instrument,f0..f{D-1},label` (or `date,instrument,price`)
/// into date slices sorted by date. Dates may be ISO-8601 strings or
/// integers; they are mapped to dense indices in ascending order.
StreamDataset load_csv(const std::string& path, CsvSchema schema,
                       std::vector<WarningRecord>* warnings = nullptr);

/// Features z-scored with moments over dates <= train_end_date; labels
/// z-scored per date with that date's own cross-section. Idempotent: a
/// dataset that already carries moments is returned unchanged.
StreamDataset normalize(const StreamDataset& ds, std::int64_t train_end_date,
                        std::vector<WarningRecord>* warnings = nullptr);

/// Consecutive train/test window pairs with stride r over n_dates dates;
/// trailing dates that do not fill a window are left out.
std::vector<TaskWindow> build_windows(std::size_t n_dates, std::size_t interval);

/// Non-overlapping consecutive windows with stride r. K0 counts tasks whose
/// test window ends at or before train_end_date, K likewise for valid_end.
/// Each of the three splits must hold at least one complete task.
TaskSchedule build_schedule(const StreamDataset& ds, std::size_t interval,
                            std::int64_t train_end_date, std::int64_t valid_end_date,
                            std::vector<WarningRecord>* warnings = nullptr);

/// y_t = (price_{t+1} - price_t) / price_t; the last date has no label.
std::vector<double> label_from_prices(const std::vector<double>& prices);

/// Resolves a date token (as it appears in the source data) to its index.
std::int64_t resolve_date_token(const StreamDataset& ds, const std::string& token);

/// Stacks the samples of slices [begin, end) row-major into [S x D].
Tensor features_matrix(const StreamDataset& ds, std::size_t slice_begin, std::size_t slice_end);
Tensor labels_vector(const StreamDataset& ds, std::size_t slice_begin, std::size_t slice_end);

}  // namespace metadapt
