#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpof/experiment.hpp"
#include "cpof/rng.hpp"
#include "cpof/run_config.hpp"
#include "cpof/scene.hpp"

using namespace cpof;
namespace fs = std::filesystem;

namespace {

struct Box {
  std::size_t r, c, h, w;
};

bool disjoint(const Box& a, const Box& b) {
  return a.r + a.h <= b.r || b.r + b.h <= a.r || a.c + a.w <= b.c || b.c + b.w <= a.c;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.scene.side = 64;
  c.scene.background = TexturedBackground{4.0, 20.0, 60.0};
  c.scene.placements = RandomLabels{{"frigate", "tanker"}};
  c.dictionary = {"frigate"};
  c.rho_grid = {1.0};
  c.trials_per_point = 4;
  c.base_seed = 7;
  return c;
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cpof_test_harness";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  fs::remove(p);
  return p;
}

}  // namespace

TEST_CASE("flat zero background with one target at the origin is the padded target") {
  SceneSpec spec;
  spec.side = 32;
  spec.background = FlatBackground{0.0};
  spec.placements = std::vector<Placement>{{"cross", 0, 0}};
  const GeneratedScene g = generate_scene(spec, builtin_targets());
  const Image t = builtin_target("cross");
  Image expect = Image::Zero(32, 32);
  expect.topLeftCorner(t.rows(), t.cols()) = t;
  CHECK(g.scene == expect);
  REQUIRE(g.truth.size() == 1);
  CHECK(g.truth[0].label == "cross");
  CHECK(g.truth[0].row == 0);
  CHECK(g.truth[0].col == 0);
}

TEST_CASE("scenes are deterministic in the seed") {
  SceneSpec spec;
  spec.side = 64;
  spec.seed = 99;
  const GeneratedScene a = generate_scene(spec, builtin_targets());
  const GeneratedScene b = generate_scene(spec, builtin_targets());
  CHECK(a.scene == b.scene);
  CHECK(a.truth.size() == b.truth.size());
  for (std::size_t i = 0; i < a.truth.size(); ++i) {
    CHECK(a.truth[i].row == b.truth[i].row);
    CHECK(a.truth[i].col == b.truth[i].col);
  }
  spec.seed = 100;
  CHECK(generate_scene(spec, builtin_targets()).scene != a.scene);
}

TEST_CASE("random placements of 1..5 targets never overlap and stay inside") {
  SceneSpec spec;
  spec.side = 64;
  spec.background = FlatBackground{0.0};
  spec.placements = RandomCount{1, 5, {"frigate", "tanker"}};
  const auto& lib = builtin_targets();
  std::size_t counts[6] = {};
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    spec.seed = seed;
    const GeneratedScene g = generate_scene(spec, lib);
    REQUIRE(g.truth.size() >= 1);
    REQUIRE(g.truth.size() <= 5);
    ++counts[g.truth.size()];
    std::vector<Box> boxes;
    for (const auto& t : g.truth) {
      const Image& img = lib.at(t.label);
      boxes.push_back({t.row, t.col, static_cast<std::size_t>(img.rows()), static_cast<std::size_t>(img.cols())});
      CHECK(t.row + img.rows() <= 64);
      CHECK(t.col + img.cols() <= 64);
    }
    for (std::size_t i = 0; i < boxes.size(); ++i)
      for (std::size_t j = i + 1; j < boxes.size(); ++j) CHECK(disjoint(boxes[i], boxes[j]));
  }
  for (std::size_t k = 1; k <= 5; ++k) CHECK(counts[k] > 100);
}

TEST_CASE("placement errors") {
  SceneSpec spec;
  spec.side = 16;
  spec.placements = std::vector<Placement>{{"frigate", 10, 0}};
  CHECK_THROWS_AS(generate_scene(spec, builtin_targets()), ParameterError);
  spec.placements = std::vector<Placement>{{"cross", 0, 0}, {"cross", 4, 4}};
  CHECK_THROWS_AS(generate_scene(spec, builtin_targets()), ParameterError);
  spec.placements = RandomCount{9, 9, {"cross"}};
  CHECK_THROWS_AS(generate_scene(spec, builtin_targets()), CongestionError);
  spec.placements = RandomLabels{{"submarine"}};
  CHECK_THROWS_AS(generate_scene(spec, builtin_targets()), ParameterError);
  spec.side = 48;
  CHECK_THROWS_AS(generate_scene(spec, builtin_targets()), SizeError);
}

TEST_CASE("composited scene is background plus targets where nothing clips") {
  SceneSpec spec;
  spec.side = 64;
  spec.seed = 5;
  spec.background = TexturedBackground{4.0, 20.0, 60.0};
  spec.placements = RandomLabels{{"frigate", "tanker"}};
  const GeneratedScene g = generate_scene(spec, builtin_targets());
  Image sum = make_background(spec.background, spec.side, derive_seed({spec.seed, 0x6267ULL}), spec.bit_depth);
  CHECK(sum.minCoeff() >= 0.0);
  CHECK(sum.maxCoeff() <= 255.0);
  for (const auto& t : g.truth) {
    const Image& img = builtin_target(t.label);
    sum.block(t.row, t.col, img.rows(), img.cols()) += img;
  }
  std::size_t compared = 0;
  for (Eigen::Index k = 0; k < sum.size(); ++k) {
    if (sum.data()[k] <= 255.0) {
      CHECK(g.scene.data()[k] == sum.data()[k]);
      ++compared;
    } else {
      CHECK(g.scene.data()[k] == 255.0);
    }
  }
  CHECK(compared > 4000);
  CHECK(g.scene.minCoeff() >= 0.0);
  CHECK(g.scene == g.scene.array().round().matrix());
}

TEST_CASE("textured background statistics") {
  const Image bg = make_background(TexturedBackground{4.0, 20.0, 100.0}, 128, 3, 8);
  const double mean = bg.mean();
  const double sd = std::sqrt((bg.array() - mean).square().mean());
  CHECK(mean == doctest::Approx(100.0).epsilon(0.02));
  CHECK(sd == doctest::Approx(20.0).epsilon(0.05));
  // Neighbouring pixels are correlated; white noise would not be.
  double lag = 0.0;
  for (Eigen::Index r = 0; r < bg.rows(); ++r)
    for (Eigen::Index c = 0; c + 1 < bg.cols(); ++c) lag += (bg(r, c) - mean) * (bg(r, c + 1) - mean);
  CHECK(lag / (bg.rows() * (bg.cols() - 1)) / (sd * sd) > 0.8);
}

TEST_CASE("measurement count and trial seeds") {
  CHECK(measurement_count(4096, 1.0) == 4096);
  CHECK(measurement_count(4096, 16.0) == 256);
  CHECK(measurement_count(100, 3.0) == 33);
  CHECK(measurement_count(4096, 1e9) == 1);
  CHECK(trial_seed(1, 0, 0) == trial_seed(1, 0, 0));
  CHECK(trial_seed(1, 0, 1) != trial_seed(1, 0, 0));
  CHECK(trial_seed(1, 1, 0) != trial_seed(1, 0, 1));
  CHECK(trial_seed(2, 0, 0) != trial_seed(1, 0, 0));
}

TEST_CASE("complete measurement trial succeeds and is reproducible") {
  const ExperimentConfig c = small_config();
  for (std::size_t t = 0; t < 3; ++t) {
    const TrialRecord a = run_trial(c, 0, t);
    CHECK(a.success);
    CHECK(a.converged);
    CHECK(a.m == 4096);
    REQUIRE(a.truth.size() == 1);
    CHECK(a.truth[0].label == "frigate");
    const TrialRecord b = run_trial(c, 0, t);
    CHECK(b.seed == a.seed);
    CHECK(b.iterations == a.iterations);
    REQUIRE(b.detections.size() == a.detections.size());
    for (std::size_t i = 0; i < a.detections.size(); ++i) {
      CHECK(b.detections[i].row == a.detections[i].row);
      CHECK(b.detections[i].col == a.detections[i].col);
      CHECK(b.detections[i].score == a.detections[i].score);
    }
  }
}

TEST_CASE("single-measurement trials succeed about as often as chance") {
  ExperimentConfig c = small_config();
  c.rho_grid = {4096.0};
  std::size_t successes = 0;
  for (std::size_t t = 0; t < 40; ++t) {
    const TrialRecord r = run_trial(c, 0, t);
    CHECK(r.m == 1);
    successes += r.success;
  }
  // A random location lands within 5 pixels with probability about 2%.
  CHECK(successes <= 5);
}

TEST_CASE("Wilson interval") {
  const auto [lo, hi] = wilson_interval(50, 100);
  CHECK(lo == doctest::Approx(0.4038).epsilon(1e-3));
  CHECK(hi == doctest::Approx(0.5962).epsilon(1e-3));
  const auto all = wilson_interval(200, 200);
  CHECK(all.second == 1.0);
  CHECK(all.first == doctest::Approx(0.9812).epsilon(1e-3));
  const auto none = wilson_interval(0, 10);
  CHECK(none.first == 0.0);
  CHECK(none.second == doctest::Approx(0.2775).epsilon(1e-3));
  for (std::size_t s = 0; s <= 30; ++s) {
    const auto [l, h] = wilson_interval(s, 30);
    CHECK(l <= s / 30.0 + 1e-12);
    CHECK(h >= s / 30.0 - 1e-12);
  }
}

TEST_CASE("aggregation recounts the trial records") {
  ExperimentConfig c = small_config();
  c.rho_grid = {1.0, 2.0};
  c.trials_per_point = 5;
  std::vector<TrialRecord> records;
  for (std::size_t g = 0; g < 2; ++g)
    for (std::size_t t = 0; t < 5; ++t) {
      TrialRecord r;
      r.grid_index = g;
      r.trial_index = t;
      r.rho = c.rho_grid[g];
      r.success = (g == 0) || (t % 2 == 0);
      records.push_back(r);
    }
  const auto points = aggregate(c, records);
  REQUIRE(points.size() == 2);
  CHECK(points[0].successes == 5);
  CHECK(points[0].probability == 1.0);
  CHECK(points[1].successes == 3);
  CHECK(points[1].trials == 5);
  CHECK(points[1].probability == doctest::Approx(0.6));
  CHECK(points[1].m == 2048);
  CHECK(points[1].wilson_halfwidth == doctest::Approx((points[1].wilson_hi - points[1].wilson_lo) / 2));
}

TEST_CASE("run_curve persists, resumes and reproduces") {
  ExperimentConfig c = small_config();
  c.rho_grid = {1.0, 8.0};
  c.trials_per_point = 3;
  const fs::path log = temp_path("curve.trials");
  const fs::path csv = temp_path("curve.csv");

  const CurveRun full = run_curve(c, {1, log, csv, nullptr});
  CHECK(full.new_trials == 6);
  CHECK(full.resumed_trials == 0);
  REQUIRE(full.points.size() == 2);
  CHECK(full.points[0].successes == 3);
  std::size_t recount = 0;
  for (const auto& r : full.records) recount += r.grid_index == 1 && r.success;
  CHECK(full.points[1].successes == recount);

  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "rho,m,trials,successes,probability,wilson_lo,wilson_hi,snr_db,basis,mode");

  // Rerun: everything comes from the log.
  const CurveRun again = run_curve(c, {1, log, {}, nullptr});
  CHECK(again.new_trials == 0);
  CHECK(again.resumed_trials == 6);
  CHECK(again.points[1].successes == full.points[1].successes);

  // Drop the last two records and add a torn line; only those trials rerun.
  std::ifstream lin(log);
  std::vector<std::string> lines;
  for (std::string l; std::getline(lin, l);) lines.push_back(l);
  lin.close();
  REQUIRE(lines.size() == 8);
  {
    std::ofstream out(log, std::ios::trunc);
    for (std::size_t i = 0; i < 6; ++i) out << lines[i] << '\n';
    out << "1,2,8,5";
  }
  const CurveRun resumed = run_curve(c, {1, log, {}, nullptr});
  CHECK(resumed.resumed_trials == 4);
  CHECK(resumed.new_trials == 2);
  REQUIRE(resumed.records.size() == full.records.size());
  for (std::size_t i = 0; i < full.records.size(); ++i) {
    CHECK(resumed.records[i].success == full.records[i].success);
    CHECK(resumed.records[i].iterations == full.records[i].iterations);
  }

  // Growing the trial count reuses the existing records.
  c.trials_per_point = 4;
  const CurveRun grown = run_curve(c, {1, log, {}, nullptr});
  CHECK(grown.resumed_trials == 6);
  CHECK(grown.new_trials == 2);

  // A log for a different configuration is refused.
  c.base_seed = 8;
  CHECK_THROWS_AS(run_curve(c, {1, log, {}, nullptr}), ParameterError);
}

TEST_CASE("workers do not change results") {
  ExperimentConfig c = small_config();
  c.rho_grid = {1.0, 8.0};
  c.trials_per_point = 3;
  const CurveRun one = run_curve(c, {1, {}, {}, nullptr});
  const CurveRun three = run_curve(c, {3, {}, {}, nullptr});
  REQUIRE(one.records.size() == three.records.size());
  for (std::size_t i = 0; i < one.records.size(); ++i) {
    CHECK(one.records[i].seed == three.records[i].seed);
    CHECK(one.records[i].success == three.records[i].success);
    CHECK(one.records[i].iterations == three.records[i].iterations);
  }
}

TEST_CASE("config validation") {
  ExperimentConfig c = small_config();
  CHECK_NOTHROW(validate(c));
  c.rho_grid = {0.5};
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = small_config();
  c.rho_grid = {};
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = small_config();
  c.dictionary = {};
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = small_config();
  c.trials_per_point = 0;
  CHECK_THROWS_AS(validate(c), ParameterError);
}

TEST_CASE("run config round trip and errors") {
  ExperimentConfig c = small_config();
  c.rho_grid = {1, 2.5, 16};
  c.snr_db = 0.0;
  c.scene_seed = 42;
  c.scene.placements = std::vector<Placement>{{"frigate", 3, 4}, {"tanker", 30, 20}};
  c.residual_floor_db = std::numeric_limits<double>::infinity();
  std::ostringstream os;
  write_run_config(os, c);
  std::istringstream is(os.str());
  const ExperimentConfig back = parse_run_config(is);
  std::ostringstream os2;
  write_run_config(os2, back);
  CHECK(os.str() == os2.str());
  CHECK(config_fingerprint(back) == config_fingerprint(c));

  std::istringstream comments("# header\n\nside = 32   # inline\nrho_grid = 1, 4\n");
  const ExperimentConfig parsed = parse_run_config(comments);
  CHECK(parsed.scene.side == 32);
  CHECK(parsed.rho_grid == std::vector<double>{1.0, 4.0});

  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream s(text);
    try {
      parse_run_config(s);
    } catch (const ConfigError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("side = 64\ncolour = red\n") == 2);
  CHECK(line_of("side = 64\n\nrho_grid = 1,x\n") == 3);
  CHECK(line_of("basis = haar\n") == 1);
  CHECK(line_of("side 64\n") == 1);
  CHECK(line_of("side = 64\nside = 32\n") == 2);

  // Trial counts do not change the fingerprint; seeds do.
  ExperimentConfig d = c;
  d.trials_per_point = 1000;
  CHECK(config_fingerprint(d) == config_fingerprint(c));
  d.base_seed = 2;
  CHECK(config_fingerprint(d) != config_fingerprint(c));
}
