#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cpof/detection.hpp"
#include "cpof/scene.hpp"
#include "cpof/solver.hpp"

namespace cpof {

enum class CorrelationMode { POF, PPC };
std::string to_string(CorrelationMode mode);
CorrelationMode parse_mode(const std::string& text);

struct ExperimentConfig {
  SceneSpec scene;
  std::vector<std::string> dictionary{"frigate"};
  BasisKind basis = BasisKind::WalshHadamard;
  CorrelationMode mode = CorrelationMode::POF;
  std::vector<double> rho_grid{1.0};
  double snr_db = std::numeric_limits<double>::infinity();
  std::size_t trials_per_point = 1000;
  std::uint64_t base_seed = 1;
  // Fixed scene for every trial when set; otherwise each trial draws its own.
  std::optional<std::uint64_t> scene_seed;
  double radius = 5.0;
  double exclusion_radius = 0.0;  // <= 0: max target dimension
  bool known_count = true;
  bool binary_differential = false;
  // Residual target for the Pareto root search, as an SNR against the AC
  // power of the clean samples; added in quadrature to the noise level.
  // +inf solves noiseless trials as exact basis pursuit.
  double residual_floor_db = 30.0;
  SolverOptions solver;
};

struct TrialRecord {
  std::size_t grid_index = 0;
  std::size_t trial_index = 0;
  double rho = 0.0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  bool success = false;
  bool converged = false;
  int iterations = 0;
  std::vector<Detection> detections;
  std::vector<GroundTruth> truth;
};

struct CurvePoint {
  double rho = 0.0;
  std::size_t m = 0;
  std::size_t successes = 0;
  std::size_t trials = 0;
  double probability = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
  double wilson_halfwidth = 0.0;
};

void validate(const ExperimentConfig& config);

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t grid_index, std::size_t trial_index);

/// Pareto root target for m samples: sqrt(m (noise_sigma^2 + signal_power 10^(-floor_db/10))).
double residual_target(std::size_t m, double noise_sigma, double signal_power, double floor_db);

/// Number of measurements for compression ratio rho: round(n / rho), at least 1.
std::size_t measurement_count(std::size_t n, double rho);

/// One end-to-end pass: scene, measurement, noise, lasso per dictionary entry,
/// classification and scoring. Deterministic in (base_seed, grid_index, trial_index).
TrialRecord run_trial(const ExperimentConfig& config, std::size_t grid_index, std::size_t trial_index,
                      const TargetLibrary& targets = builtin_targets());

/// Wilson score interval at 95% confidence; returns {lo, hi}.
std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

std::vector<CurvePoint> aggregate(const ExperimentConfig& config, const std::vector<TrialRecord>& records);

struct CurveRunOptions {
  std::size_t workers = 1;
  // Per-trial log used for resuming; empty disables persistence.
  std::filesystem::path trial_log;
  // Curve CSV written at the end; empty skips.
  std::filesystem::path curve_csv;
  std::ostream* progress = nullptr;
};

struct CurveRun {
  std::vector<CurvePoint> points;
  std::vector<TrialRecord> records;
  std::size_t resumed_trials = 0;  // loaded from the trial log
  std::size_t new_trials = 0;
};

CurveRun run_curve(const ExperimentConfig& config, const CurveRunOptions& options = {},
                   const TargetLibrary& targets = builtin_targets());

void write_curve_csv(std::ostream& os, const ExperimentConfig& config, const std::vector<CurvePoint>& points);

/// Hash of every config field that affects trial outcomes (not trial counts).
std::uint64_t config_fingerprint(const ExperimentConfig& config);

}  // namespace cpof
