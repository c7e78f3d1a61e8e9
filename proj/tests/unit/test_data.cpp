#include <doctest.h>

#include <cmath>
#include <set>

#include "fcgaga/data.hpp"
#include "helpers.hpp"

using namespace fcgaga;

namespace {

SpeedPanel ramp_panel(std::size_t steps, std::size_t nodes) {
  SpeedPanel p;
  for (std::size_t i = 0; i < nodes; ++i) p.node_ids.push_back("n" + std::to_string(i));
  for (std::size_t t = 0; t < steps; ++t) {
    p.timestamps.push_back(1330560000 + 300 * static_cast<std::int64_t>(t));
    for (std::size_t i = 0; i < nodes; ++i) p.values.push_back(static_cast<double>(t) + 0.001 * static_cast<double>(i));
  }
  return p;
}

std::size_t parse_error_line(std::string_view text) {
  try {
    parse_panel_csv(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("csv parse") {
    const auto p = parse_panel_csv(
        "timestamp,773869,767541\n"
        "2012-03-01 00:00:00,64.375,67.625\n"
        "2012-03-01 00:05:00,62.667,68.555\n"
        "2012-03-01T00:10,64.0,0\n");
    CHECK(p.num_steps() == 3);
    CHECK(p.num_nodes() == 2);
    CHECK(p.node_ids[1] == "767541");
    CHECK(p.at(1, 1) == 68.555);
    CHECK(p.at(2, 1) == 0.0);
    CHECK(format_timestamp(p.timestamps[0]) == "2012-03-01 00:00:00");
  }

  TEST_CASE("csv errors carry line numbers") {
    CHECK(parse_error_line("timestamp,a,b\n2012-03-01 00:00,1,2\n2012-03-01 00:05,1\n") == 3);
    CHECK(parse_error_line("timestamp,a\n2012-03-01 00:05,1\n2012-03-01 00:00,1\n") == 3);
    CHECK(parse_error_line("timestamp,a\n2012-03-01 00:00,1\n2012-03-01 00:05,-4\n") == 3);
    CHECK(parse_error_line("timestamp,a\n2012-03-01 00:00,x\n") == 2);
    CHECK(parse_error_line("timestamp,a\n2012-03-01 00:00,1\n2012-03-01 00:15,1\n") == 3);
  }

  TEST_CASE("missing file") {
    CHECK_THROWS_AS(load_panel("/nonexistent/panel.csv", PanelFormat::kCsv), std::runtime_error);
    CHECK_THROWS_AS(parse_panel_format("parquet"), std::invalid_argument);
  }

  TEST_CASE("csv and cache round trips") {
    auto p = ramp_panel(50, 3);
    p.values[7] = 1.0 / 3.0;
    p.values[8] = 0.0;
    const auto dir = testutil::scratch_dir("data_roundtrip");
    save_panel_csv(p, dir / "p.csv");
    save_panel_cache(p, dir / "p.bin");
    CHECK(load_panel(dir / "p.csv", PanelFormat::kCsv) == p);
    CHECK(load_panel(dir / "p.bin", PanelFormat::kBinaryCache) == p);
    CHECK_THROWS_AS(load_panel(dir / "p.csv", PanelFormat::kBinaryCache), ParseError);
  }

  TEST_CASE("splits") {
    const auto s = split(100, {});
    CHECK(s.train == StepRange{0, 70});
    CHECK(s.validation == StepRange{70, 80});
    CHECK(s.test == StepRange{80, 100});

    const auto la = split(34272, {}, {12, 12});
    CHECK(la.train == StepRange{0, 23990});
    CHECK(la.validation == StepRange{23990, 27417});
    CHECK(la.test == StepRange{27417, 34272});

    const auto bay = split(52116, {}, {12, 12});
    CHECK(bay.train.end == 36481);
    CHECK(bay.validation.end == 41692);

    CHECK_THROWS_AS(split(10, {}, {12, 12}), std::invalid_argument);
    CHECK_THROWS_AS(split(100, {0.5, 0.1, 0.1}), std::invalid_argument);
  }

  TEST_CASE("time features") {
    const TimeFeatureSpec tod{true, false};
    CHECK(time_features(*parse_timestamp("2012-03-01 00:00"), tod) == std::vector<double>{0.0});
    CHECK(time_features(*parse_timestamp("2012-03-01 12:00"), tod) == std::vector<double>{0.5});
    const auto f = time_features(*parse_timestamp("2012-03-07 06:05"), {true, true});
    REQUIRE(f.size() == 8);
    CHECK(f[0] == doctest::Approx(365.0 / 1440.0).epsilon(1e-15));
    CHECK(f[0] == doctest::Approx(0.253472).epsilon(1e-6));
    CHECK(std::vector<double>(f.begin() + 1, f.end()) == std::vector<double>{0, 0, 1, 0, 0, 0, 0});
    const auto monday = time_features(*parse_timestamp("2012-03-05 23:55"), {false, true});
    CHECK(monday == std::vector<double>{1, 0, 0, 0, 0, 0, 0});
  }

  TEST_CASE("batches") {
    const auto p = ramp_panel(200, 207);
    const WindowSpec window{12, 12};
    BatchSampler a(p, {0, 140}, window, {}, 42);
    BatchSampler b(p, {0, 140}, window, {}, 42);
    for (int k = 0; k < 20; ++k) {
      const auto x = a.next(4);
      const auto y = b.next(4);
      CHECK(x.anchors == y.anchors);
      CHECK(x.history.rows() == 828);
      CHECK(x.target.shape() == Shape{828, 12});
      CHECK(x.input_time_features.shape() == Shape{828, 1});
    }
  }

  TEST_CASE("training anchors respect the range") {
    const auto p = ramp_panel(120, 2);
    const WindowSpec window{12, 12};
    const StepRange range{30, 90};
    BatchSampler s(p, range, window, {}, 7);
    std::set<std::size_t> seen;
    for (const auto& batch : s.sample_epoch(200, 4)) {
      for (auto t : batch.anchors) {
        CHECK(t + 1 >= range.begin + window.history);
        CHECK(t + window.horizon < range.end);
        seen.insert(t);
      }
    }
    CHECK(*seen.begin() == 41);
    CHECK(*seen.rbegin() == 77);
    CHECK_THROWS_AS(BatchSampler(p, {0, 20}, window, {}, 1), std::invalid_argument);
  }

  TEST_CASE("window contents") {
    const auto p = ramp_panel(40, 2);
    const std::vector<std::size_t> anchors{11};
    const auto b = make_batch(p, anchors, {12, 12}, {});
    for (std::size_t k = 0; k < 12; ++k) {
      CHECK(b.history.at(1, k) == doctest::Approx(static_cast<double>(k) + 0.001));
      CHECK(b.target.at(0, k) == static_cast<double>(12 + k));
    }
  }

  TEST_CASE("evaluation covers every target step once") {
    const auto p = ramp_panel(100, 3);
    const WindowSpec window{4, 3};
    const auto s = split(100, {}, window);
    for (const auto& range : {s.validation, s.test}) {
      EvalIterator it(p, range, window, {}, 5);
      std::vector<std::size_t> anchors;
      while (auto batch = it.next()) {
        CHECK(batch->anchors.size() <= 5);
        anchors.insert(anchors.end(), batch->anchors.begin(), batch->anchors.end());
      }
      CHECK(anchors.size() == it.num_anchors());
      CHECK(anchors.front() == range.begin - 1);
      CHECK(anchors.back() + window.horizon == range.end - 1);
      for (std::size_t k = 1; k < anchors.size(); ++k) CHECK(anchors[k] == anchors[k - 1] + 1);
    }
  }

  TEST_CASE("no leakage between splits") {
    const WindowSpec window{12, 12};
    const auto s = split(34272, {}, window);
    const auto train = training_anchors(s.train, window);
    CHECK(train.back() + window.horizon < s.train.end);
    for (const auto& range : {s.validation, s.test}) {
      const auto eval = evaluation_anchors(range, window);
      CHECK(eval.front() + 1 >= range.begin);
      CHECK(eval.back() + window.horizon < range.end);
    }
  }
}
