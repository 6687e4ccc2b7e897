#include "metadapt/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "metadapt/errors.hpp"

namespace metadapt {

namespace {

void warn(std::vector<WarningRecord>* sink, std::string source, std::string message) {
  if (sink) sink->push_back({std::move(source), std::move(message)});
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double parse_number(const std::string& text, std::size_t row, const std::string& column) {
  try {
    std::size_t pos = 0;
    double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing characters");
    if (!std::isfinite(v)) {
      throw DataError("row " + std::to_string(row) + ": non-finite value in column '" + column + "'");
    }
    return v;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception&) {
    throw DataError("row " + std::to_string(row) + ": non-numeric value '" + text +
                    "' in column '" + column + "'");
  }
}

// Date tokens sort correctly as strings for ISO-8601; bare integers are
// compared numerically so "9" < "10" behaves as expected.
struct DateKey {
  bool is_int = false;
  std::int64_t number = 0;
  std::string text;

  bool operator<(const DateKey& other) const {
    if (is_int && other.is_int) return number < other.number;
    if (is_int != other.is_int) return is_int;  // integers sort before strings
    return text < other.text;
  }
};

DateKey parse_date_token(const std::string& token) {
  DateKey key;
  key.text = token;
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec == std::errc() && ptr == token.data() + token.size()) {
    key.is_int = true;
    key.number = v;
  }
  return key;
}

}  // namespace

std::size_t StreamDataset::total_samples() const {
  std::size_t n = 0;
  for (const auto& slice : slices) n += slice.samples.size();
  return n;
}

StreamDataset load_csv(const std::string& path, CsvSchema schema,
                       std::vector<WarningRecord>* warnings) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");

  // Leading '#' lines are metadata (the generator echoes its seed there).
  std::string line;
  do {
    if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
  } while (!line.empty() && line[0] == '#');

  auto header = split_csv_line(line);
  std::size_t feature_dim = 0;
  if (schema == CsvSchema::Features) {
    if (header.size() < 4 || header[0] != "date" || header[1] != "instrument" ||
        header.back() != "label") {
      throw DataError("header must be date,instrument,f0..f{D-1},label; got '" + line + "'");
    }
    feature_dim = header.size() - 3;
    for (std::size_t i = 0; i < feature_dim; ++i) {
      std::string expect = "f" + std::to_string(i);
      if (header[2 + i] != expect) {
        throw DataError("missing column '" + expect + "' (found '" + header[2 + i] + "')");
      }
    }
  } else {
    if (header.size() != 3 || header[0] != "date" || header[1] != "instrument" ||
        header[2] != "price") {
      throw DataError("header must be date,instrument,price; got '" + line + "'");
    }
    feature_dim = 1;
  }

  struct Row {
    std::string instrument;
    std::vector<double> features;
    double label = 0.0;
    double price = 0.0;
  };
  std::map<DateKey, std::vector<Row>> by_date;
  std::set<std::pair<std::string, std::string>> seen;  // (date token, instrument)

  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError("row " + std::to_string(row_number) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    if (!seen.insert({fields[0], fields[1]}).second) {
      throw DataError("row " + std::to_string(row_number) + ": duplicate (date, instrument) pair (" +
                      fields[0] + ", " + fields[1] + ")");
    }
    Row row;
    row.instrument = fields[1];
    if (schema == CsvSchema::Features) {
      row.features.resize(feature_dim);
      for (std::size_t i = 0; i < feature_dim; ++i) {
        row.features[i] = parse_number(fields[2 + i], row_number, header[2 + i]);
      }
      row.label = parse_number(fields.back(), row_number, "label");
    } else {
      row.price = parse_number(fields[2], row_number, "price");
      if (row.price <= 0.0) {
        throw DataError("row " + std::to_string(row_number) + ": nonpositive price " +
                        std::to_string(row.price));
      }
    }
    by_date[parse_date_token(fields[0])].push_back(std::move(row));
  }
  if (by_date.empty()) throw DataError("'" + path + "' has a header but no data rows");

  StreamDataset ds;
  ds.feature_dim = feature_dim;

  if (schema == CsvSchema::Features) {
    std::int64_t index = 0;
    for (auto& [key, rows] : by_date) {
      DateSlice slice;
      slice.date_index = index;
      slice.date_label = key.text;
      for (auto& row : rows) {
        slice.samples.push_back(
            {index, std::move(row.instrument), Tensor::vector(std::move(row.features)), row.label});
      }
      std::sort(slice.samples.begin(), slice.samples.end(),
                [](const Sample& a, const Sample& b) { return a.instrument_id < b.instrument_id; });
      ds.slices.push_back(std::move(slice));
      ++index;
    }
    return ds;
  }

  // Price schema: per-instrument change-rate labels; the final date carries
  // no label and is dropped. The single feature is the price itself.
  std::vector<std::pair<DateKey, std::vector<Row>>> ordered(by_date.begin(), by_date.end());
  std::map<std::string, std::vector<std::pair<std::size_t, double>>> series;  // instrument -> (date pos, price)
  for (std::size_t pos = 0; pos < ordered.size(); ++pos) {
    for (const auto& row : ordered[pos].second) {
      series[row.instrument].push_back({pos, row.price});
    }
  }
  std::map<std::size_t, std::vector<Sample>> samples_by_pos;
  for (auto& [instrument, points] : series) {
    if (points.size() < 2) {
      warn(warnings, "load_csv", "instrument '" + instrument + "' has fewer than 2 dates; skipped");
      continue;
    }
    std::vector<double> prices;
    prices.reserve(points.size());
    for (const auto& [pos, price] : points) prices.push_back(price);
    auto labels = label_from_prices(prices);
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
      Sample s;
      s.instrument_id = instrument;
      s.features = Tensor::vector({points[i].second});
      s.label = labels[i];
      samples_by_pos[points[i].first].push_back(std::move(s));
    }
  }
  if (samples_by_pos.empty()) throw DataError("'" + path + "' yields no labeled samples");
  std::int64_t index = 0;
  for (auto& [pos, samples] : samples_by_pos) {
    DateSlice slice;
    slice.date_index = index;
    slice.date_label = ordered[pos].first.text;
    slice.samples = std::move(samples);
    std::sort(slice.samples.begin(), slice.samples.end(),
              [](const Sample& a, const Sample& b) { return a.instrument_id < b.instrument_id; });
    for (auto& s : slice.samples) s.date_index = index;
    ds.slices.push_back(std::move(slice));
    ++index;
  }
  return ds;
}

StreamDataset normalize(const StreamDataset& ds, std::int64_t train_end_date,
                        std::vector<WarningRecord>* warnings) {
  if (ds.normalized) return ds;
  if (ds.slices.empty()) throw DataError("normalize: empty dataset");

  const std::size_t d = ds.feature_dim;
  FeatureMoments moments;
  moments.mean.assign(d, 0.0);
  moments.stddev.assign(d, 0.0);

  std::size_t count = 0;
  for (const auto& slice : ds.slices) {
    if (slice.date_index > train_end_date) continue;
    for (const auto& sample : slice.samples) {
      for (std::size_t j = 0; j < d; ++j) moments.mean[j] += sample.features[j];
      ++count;
    }
  }
  if (count == 0) throw DataError("normalize: no samples at or before the train end date");
  for (std::size_t j = 0; j < d; ++j) moments.mean[j] /= static_cast<double>(count);
  for (const auto& slice : ds.slices) {
    if (slice.date_index > train_end_date) continue;
    for (const auto& sample : slice.samples) {
      for (std::size_t j = 0; j < d; ++j) {
        double delta = sample.features[j] - moments.mean[j];
        moments.stddev[j] += delta * delta;
      }
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    moments.stddev[j] = std::sqrt(moments.stddev[j] / static_cast<double>(count));
    if (moments.stddev[j] == 0.0) {
      warn(warnings, "normalize",
           "feature f" + std::to_string(j) + " is constant over the training range; centering only");
    }
  }

  StreamDataset out = ds;
  out.feature_moments = moments;
  out.normalized = true;
  for (auto& slice : out.slices) {
    // Per-date label moments from this date's own cross-section.
    const std::size_t n = slice.samples.size();
    double label_mean = 0.0, label_std = 0.0;
    for (const auto& s : slice.samples) label_mean += s.label;
    label_mean /= static_cast<double>(n);
    for (const auto& s : slice.samples) {
      double delta = s.label - label_mean;
      label_std += delta * delta;
    }
    label_std = std::sqrt(label_std / static_cast<double>(n));

    bool label_passthrough = n < 2;
    bool label_center_only = !label_passthrough && label_std == 0.0;
    if (label_passthrough) {
      warn(warnings, "normalize",
           "date " + slice.date_label + " has a single sample; label passed through");
    } else if (label_center_only) {
      warn(warnings, "normalize",
           "date " + slice.date_label + " has constant labels; centering only");
    }

    for (auto& sample : slice.samples) {
      for (std::size_t j = 0; j < d; ++j) {
        double centered = sample.features[j] - moments.mean[j];
        sample.features[j] = moments.stddev[j] > 0.0 ? centered / moments.stddev[j] : centered;
      }
      if (label_passthrough) {
        // leave as is
      } else if (label_center_only) {
        sample.label -= label_mean;
      } else {
        sample.label = (sample.label - label_mean) / label_std;
      }
    }
  }
  return out;
}

std::vector<TaskWindow> build_windows(std::size_t n_dates, std::size_t interval) {
  if (interval < 1) throw ScheduleError("task interval must be >= 1");
  std::vector<TaskWindow> windows;
  std::size_t k = 0;
  while ((k + 2) * interval <= n_dates) {
    TaskWindow w;
    w.task_index = k;
    w.train_begin = k * interval;
    w.train_end = (k + 1) * interval;
    w.test_begin = w.train_end;
    w.test_end = (k + 2) * interval;
    windows.push_back(w);
    ++k;
  }
  return windows;
}

TaskSchedule build_schedule(const StreamDataset& ds, std::size_t interval,
                            std::int64_t train_end_date, std::int64_t valid_end_date,
                            std::vector<WarningRecord>* warnings) {
  if (valid_end_date < train_end_date) {
    throw ScheduleError("valid end date " + std::to_string(valid_end_date) +
                        " precedes train end date " + std::to_string(train_end_date));
  }

  TaskSchedule schedule;
  schedule.interval = interval;
  const std::size_t n = ds.n_dates();
  schedule.tasks = build_windows(n, interval);
  if (schedule.tasks.empty()) {
    throw ScheduleError("interval " + std::to_string(interval) + " too large for " +
                        std::to_string(n) + " dates");
  }
  std::size_t leftover = n - schedule.tasks.back().test_end;
  if (leftover > 0) {
    warn(warnings, "build_schedule",
         std::to_string(leftover) + " trailing dates do not fill a window and were dropped");
  }

  for (const auto& task : schedule.tasks) {
    std::int64_t test_last = ds.slices[task.test_end - 1].date_index;
    if (test_last <= train_end_date) schedule.meta_train_count = task.task_index + 1;
    if (test_last <= valid_end_date) schedule.meta_valid_count = task.task_index + 1;
  }
  if (schedule.meta_train_count == 0) throw ScheduleError("no complete task inside the meta-train range");
  if (schedule.meta_valid_count <= schedule.meta_train_count) {
    throw ScheduleError("no complete task inside the meta-valid range");
  }
  if (schedule.meta_valid_count >= schedule.n_tasks()) {
    throw ScheduleError("no complete task inside the meta-test range");
  }
  return schedule;
}

std::vector<double> label_from_prices(const std::vector<double>& prices) {
  if (prices.size() < 2) throw DataError("label_from_prices: need at least 2 dates");
  for (std::size_t i = 0; i < prices.size(); ++i) {
    if (prices[i] <= 0.0) {
      throw DataError("label_from_prices: nonpositive price " + std::to_string(prices[i]) +
                      " at position " + std::to_string(i));
    }
  }
  std::vector<double> labels(prices.size() - 1);
  for (std::size_t i = 0; i + 1 < prices.size(); ++i) {
    labels[i] = (prices[i + 1] - prices[i]) / prices[i];
  }
  return labels;
}

Tensor features_matrix(const StreamDataset& ds, std::size_t slice_begin, std::size_t slice_end) {
  std::size_t rows = 0;
  for (std::size_t i = slice_begin; i < slice_end; ++i) rows += ds.slices[i].samples.size();
  Tensor out = Tensor::zeros({rows, ds.feature_dim});
  std::size_t r = 0;
  for (std::size_t i = slice_begin; i < slice_end; ++i) {
    for (const auto& sample : ds.slices[i].samples) {
      std::copy(sample.features.data(), sample.features.data() + ds.feature_dim,
                out.data() + r * ds.feature_dim);
      ++r;
    }
  }
  return out;
}

Tensor labels_vector(const StreamDataset& ds, std::size_t slice_begin, std::size_t slice_end) {
  std::vector<double> labels;
  for (std::size_t i = slice_begin; i < slice_end; ++i) {
    for (const auto& sample : ds.slices[i].samples) labels.push_back(sample.label);
  }
  return Tensor::vector(std::move(labels));
}

std::int64_t resolve_date_token(const StreamDataset& ds, const std::string& token) {
  for (const auto& slice : ds.slices) {
    if (slice.date_label == token) return slice.date_index;
  }
  // Allow integer tokens that fall between observed dates.
  auto key = parse_date_token(token);
  if (key.is_int) {
    std::int64_t best = -1;
    for (const auto& slice : ds.slices) {
      auto slice_key = parse_date_token(slice.date_label);
      if (slice_key.is_int && slice_key.number <= key.number) best = slice.date_index;
    }
    if (best >= 0) return best;
  }
  throw DataError("date token '" + token + "' not found in the dataset");
}

}  // namespace metadapt
