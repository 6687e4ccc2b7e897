#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "metadapt/data.hpp"
#include "metadapt/errors.hpp"

using namespace metadapt;

namespace {

struct TempCsv {
  std::filesystem::path path;
  explicit TempCsv(const std::string& content) {
    path = std::filesystem::temp_directory_path() /
           ("metadapt_test_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + ".csv");
    std::ofstream out(path);
    out << content;
  }
  ~TempCsv() { std::filesystem::remove(path); }
};

StreamDataset tiny_dataset(std::vector<std::vector<double>> labels_by_date, std::size_t d = 2) {
  StreamDataset ds;
  ds.feature_dim = d;
  for (std::size_t t = 0; t < labels_by_date.size(); ++t) {
    DateSlice slice;
    slice.date_index = static_cast<std::int64_t>(t);
    slice.date_label = std::to_string(t);
    for (std::size_t s = 0; s < labels_by_date[t].size(); ++s) {
      Sample sample;
      sample.date_index = slice.date_index;
      sample.instrument_id = "s" + std::to_string(s);
      std::vector<double> f(d, static_cast<double>(s + t));
      f[0] += 0.5 * static_cast<double>(s);
      sample.features = Tensor::vector(std::move(f));
      sample.label = labels_by_date[t][s];
      slice.samples.push_back(std::move(sample));
    }
    ds.slices.push_back(std::move(slice));
  }
  return ds;
}

}  // namespace

TEST_CASE("load_csv groups rows into date slices") {
  TempCsv csv(
      "date,instrument,f0,f1,f2,label\n"
      "2020-01-02,aaa,1,2,3,0.5\n"
      "2020-01-02,bbb,4,5,6,-0.5\n"
      "2020-01-01,aaa,7,8,9,0.1\n"
      "2020-01-01,bbb,1,1,1,-0.1\n");
  StreamDataset ds = load_csv(csv.path.string(), CsvSchema::Features);
  CHECK(ds.n_dates() == 2);
  CHECK(ds.feature_dim == 3);
  CHECK(ds.slices[0].date_label == "2020-01-01");  // sorted
  CHECK(ds.slices[0].samples.size() == 2);
  CHECK(ds.slices[1].samples[0].features[0] == 1.0);
}

TEST_CASE("load_csv rejects degenerate inputs with row numbers") {
  TempCsv empty("");
  CHECK_THROWS_AS(load_csv(empty.path.string(), CsvSchema::Features), DataError);

  TempCsv header_only("date,instrument,f0,label\n");
  CHECK_THROWS_AS(load_csv(header_only.path.string(), CsvSchema::Features), DataError);

  TempCsv nan_cell(
      "date,instrument,f0,label\n"
      "1,aaa,0.5,0.1\n"
      "2,aaa,nan,0.1\n");
  CHECK_THROWS_WITH_AS(load_csv(nan_cell.path.string(), CsvSchema::Features),
                       doctest::Contains("row 3"), DataError);

  TempCsv duplicate(
      "date,instrument,f0,label\n"
      "1,aaa,0.5,0.1\n"
      "1,aaa,0.7,0.2\n");
  CHECK_THROWS_WITH_AS(load_csv(duplicate.path.string(), CsvSchema::Features),
                       doctest::Contains("duplicate"), DataError);

  TempCsv bad_header("date,instrument,x0,label\n1,aaa,0.5,0.1\n");
  CHECK_THROWS_AS(load_csv(bad_header.path.string(), CsvSchema::Features), DataError);
}

TEST_CASE("load_csv price schema builds change-rate labels") {
  TempCsv csv(
      "date,instrument,price\n"
      "1,aaa,100\n"
      "2,aaa,110\n"
      "3,aaa,55\n");
  StreamDataset ds = load_csv(csv.path.string(), CsvSchema::Price);
  CHECK(ds.n_dates() == 2);  // last date dropped
  CHECK(ds.slices[0].samples[0].label == doctest::Approx(0.10));
  CHECK(ds.slices[1].samples[0].label == doctest::Approx(-0.5));
  CHECK(ds.slices[0].samples[0].features[0] == 100.0);
}

TEST_CASE("label_from_prices examples") {
  CHECK(label_from_prices({100, 110})[0] == doctest::Approx(0.10));
  CHECK(label_from_prices({100, 50})[0] == doctest::Approx(-0.5));
  auto flat = label_from_prices({42, 42, 42});
  CHECK(flat.size() == 2);
  CHECK(flat[0] == 0.0);
  CHECK(flat[1] == 0.0);
  CHECK_THROWS_AS(label_from_prices({100}), DataError);
  CHECK_THROWS_AS(label_from_prices({100, -5}), DataError);
}

TEST_CASE("normalize z-scores labels per date") {
  StreamDataset ds = tiny_dataset({{1.0, 3.0}, {2.0, 6.0}});
  std::vector<WarningRecord> warnings;
  StreamDataset out = normalize(ds, 1, &warnings);
  // date 0: mean 2, population std 1 -> [-1, 1]
  CHECK(out.slices[0].samples[0].label == doctest::Approx(-1.0));
  CHECK(out.slices[0].samples[1].label == doctest::Approx(1.0));
  // date 1: mean 4, std 2 -> [-1, 1]
  CHECK(out.slices[1].samples[0].label == doctest::Approx(-1.0));
  CHECK(out.slices[1].samples[1].label == doctest::Approx(1.0));
}

TEST_CASE("normalize guards constant feature columns and single-sample dates") {
  StreamDataset ds = tiny_dataset({{1.0, 3.0}, {5.0}});
  // second feature dimension is s + t which varies; make a constant column
  for (auto& slice : ds.slices) {
    for (auto& sample : slice.samples) sample.features[1] = 7.0;
  }
  std::vector<WarningRecord> warnings;
  StreamDataset out = normalize(ds, 1, &warnings);
  for (const auto& slice : out.slices) {
    for (const auto& sample : slice.samples) {
      CHECK(sample.features[1] == 0.0);  // centered only
    }
  }
  // single-sample date: label passes through
  CHECK(out.slices[1].samples[0].label == 5.0);
  CHECK(warnings.size() >= 2);
}

TEST_CASE("normalize is idempotent once moments are stored") {
  StreamDataset ds = tiny_dataset({{1.0, 3.0}, {2.0, 6.0}, {0.0, 1.0}});
  StreamDataset once = normalize(ds, 1);
  StreamDataset twice = normalize(once, 1);
  REQUIRE(once.feature_moments.has_value());
  for (std::size_t t = 0; t < once.n_dates(); ++t) {
    for (std::size_t s = 0; s < once.slices[t].samples.size(); ++s) {
      CHECK(twice.slices[t].samples[s].label == once.slices[t].samples[s].label);
      for (std::size_t j = 0; j < once.feature_dim; ++j) {
        CHECK(twice.slices[t].samples[s].features[j] == once.slices[t].samples[s].features[j]);
      }
    }
  }
}

TEST_CASE("normalized labels have zero mean unit std per date") {
  StreamDataset ds = tiny_dataset({{0.4, -1.2, 3.3, 0.0}, {5.0, 2.0, -1.0, 0.5}});
  StreamDataset out = normalize(ds, 1);
  for (const auto& slice : out.slices) {
    double mean = 0.0, var = 0.0;
    for (const auto& s : slice.samples) mean += s.label;
    mean /= static_cast<double>(slice.samples.size());
    for (const auto& s : slice.samples) var += (s.label - mean) * (s.label - mean);
    var /= static_cast<double>(slice.samples.size());
    CHECK(std::abs(mean) <= 1e-10);
    CHECK(std::abs(std::sqrt(var) - 1.0) <= 1e-10);
  }
}

TEST_CASE("build_schedule windows and splits") {
  std::vector<std::vector<double>> labels(60, {1.0, 2.0});
  StreamDataset ds = tiny_dataset(labels);

  SUBCASE("60 dates at r=20 give two windows, stride 20") {
    auto windows = build_windows(60, 20);
    CHECK(windows.size() == 2);
    CHECK(windows[0].train_begin == 0);
    CHECK(windows[0].train_end == 20);
    CHECK(windows[0].test_end == 40);
    CHECK(windows[1].train_begin == 20);
    CHECK(windows[1].test_end == 60);
  }

  SUBCASE("schedule splits count tasks by where their test window ends") {
    TaskSchedule schedule = build_schedule(ds, 10, 29, 39);
    CHECK(schedule.n_tasks() == 5);
    CHECK(schedule.meta_train_count == 2);
    CHECK(schedule.meta_valid_count == 3);
  }

  SUBCASE("r=1 over 4 dates gives 3 tasks") {
    std::vector<std::vector<double>> four(4, {1.0, 2.0});
    TaskSchedule schedule = build_schedule(tiny_dataset(four), 1, 1, 2);
    CHECK(schedule.n_tasks() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(schedule.tasks[k].train_begin == k);
      CHECK(schedule.tasks[k].test_end == k + 2);
    }
  }

  SUBCASE("valid end before train end is an error") {
    CHECK_THROWS_AS(build_schedule(ds, 20, 40, 30), ScheduleError);
  }

  SUBCASE("oversized interval is an error") {
    CHECK_THROWS_AS(build_schedule(ds, 40, 39, 59), ScheduleError);
  }
}

TEST_CASE("schedule windows tile the date range and share boundaries") {
  std::vector<std::vector<double>> labels(47, {1.0, 2.0});  // trailing dates dropped
  StreamDataset ds = tiny_dataset(labels);
  std::vector<WarningRecord> warnings;
  TaskSchedule schedule = build_schedule(ds, 5, 19, 29, &warnings);
  CHECK_FALSE(warnings.empty());
  for (std::size_t k = 0; k + 1 < schedule.n_tasks(); ++k) {
    // test window of task k is exactly the train window of task k+1
    CHECK(schedule.tasks[k].test_begin == schedule.tasks[k + 1].train_begin);
    CHECK(schedule.tasks[k].test_end == schedule.tasks[k + 1].train_end);
    // contiguous, no gaps
    CHECK(schedule.tasks[k].train_end == schedule.tasks[k].test_begin);
  }
}

TEST_CASE("resolve_date_token matches labels and integer fallbacks") {
  StreamDataset ds = tiny_dataset({{1, 2}, {1, 2}, {1, 2}});
  CHECK(resolve_date_token(ds, "1") == 1);
  CHECK_THROWS_AS(resolve_date_token(ds, "nope"), DataError);
}
