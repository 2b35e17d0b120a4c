#include "cpof/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "cpof/rng.hpp"
#include "cpof/sensing.hpp"

namespace cpof {

std::string to_string(CorrelationMode mode) { return mode == CorrelationMode::POF ? "pof" : "ppc"; }

CorrelationMode parse_mode(const std::string& text) {
  if (text == "pof") return CorrelationMode::POF;
  if (text == "ppc") return CorrelationMode::PPC;
  throw ParameterError("unknown mode '" + text + "' (expected pof or ppc)");
}

void validate(const ExperimentConfig& config) {
  if (!is_power_of_two(config.scene.side)) throw ParameterError("side must be a power of two");
  if (config.dictionary.empty()) throw ParameterError("dictionary must name at least one target");
  if (config.rho_grid.empty()) throw ParameterError("rho_grid must not be empty");
  for (double rho : config.rho_grid) {
    if (!(rho >= 1.0) || !std::isfinite(rho)) throw ParameterError("rho_grid values must be finite and >= 1");
  }
  if (config.trials_per_point == 0) throw ParameterError("trials_per_point must be positive");
  if (!(config.radius >= 0.0)) throw ParameterError("radius must be nonnegative");
  if (std::isnan(config.residual_floor_db)) throw ParameterError("residual_floor_db must be a number or inf");
  if (config.binary_differential &&
      (config.basis != BasisKind::WalshHadamard || config.mode != CorrelationMode::POF)) {
    throw ParameterError("binary differential measurement needs the wh basis in pof mode");
  }
}

std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t grid_index, std::size_t trial_index) {
  return derive_seed({base_seed, grid_index, trial_index});
}

std::size_t measurement_count(std::size_t n, double rho) {
  const auto m = static_cast<std::size_t>(std::llround(static_cast<double>(n) / rho));
  return std::clamp<std::size_t>(m, 1, n);
}

namespace {

Dictionary build_dictionary(const ExperimentConfig& config, const TargetLibrary& targets) {
  Dictionary dict(config.scene.side);
  for (const std::string& label : config.dictionary) {
    auto it = targets.find(label);
    if (it == targets.end()) throw ParameterError("dictionary label '" + label + "' has no target image");
    dict.add(label, it->second);
  }
  return dict;
}

}  // namespace

double residual_target(std::size_t m, double noise_sigma, double signal_power, double floor_db) {
  const double floor_power = signal_power * std::pow(10.0, -floor_db / 10.0);
  return std::sqrt(static_cast<double>(m) * (noise_sigma * noise_sigma + floor_power));
}

TrialRecord run_trial(const ExperimentConfig& config, std::size_t grid_index, std::size_t trial_index,
                      const TargetLibrary& targets) {
  validate(config);
  if (grid_index >= config.rho_grid.size()) throw ParameterError("run_trial: grid index out of range");

  TrialRecord rec;
  rec.grid_index = grid_index;
  rec.trial_index = trial_index;
  rec.rho = config.rho_grid[grid_index];
  rec.seed = trial_seed(config.base_seed, grid_index, trial_index);

  const Dictionary dict = build_dictionary(config, targets);
  const double exclusion =
      config.exclusion_radius > 0.0 ? config.exclusion_radius : static_cast<double>(dict.max_target_dimension());

  SceneSpec spec = config.scene;
  spec.seed = config.scene_seed.value_or(derive_seed({rec.seed, 1}));
  spec.min_separation = std::max(spec.min_separation, exclusion);
  const GeneratedScene scene = generate_scene(spec, targets);

  const std::size_t n = spec.side * spec.side;
  rec.m = measurement_count(n, rec.rho);
  const RowSelection selection = select_rows(config.basis, n, rec.m, derive_seed({rec.seed, 2}));

  Measurement meas = config.binary_differential
                         ? normalize_differential(measure_differential_binary(scene.scene, selection))
                         : measure(to_complex(scene.scene), selection, config.mode == CorrelationMode::PPC);
  const double clean_power = ac_power(meas.samples);
  meas = add_noise(meas, config.snr_db, derive_seed({rec.seed, 3}));
  const double sigma = residual_target(rec.m, meas.noise_sigma, clean_power, config.residual_floor_db);

  std::vector<std::pair<std::string, CorrelationPlane>> planes;
  rec.converged = true;
  for (const DictionaryEntry& entry : dict.entries()) {
    LassoProblem problem{SensingOperator(selection, entry.pof), meas.samples, AutoTau{sigma}};
    SolverResult result = solve_lasso(problem, config.solver);
    rec.converged = rec.converged && result.converged;
    rec.iterations += result.iterations;
    planes.emplace_back(entry.label, std::move(result.s_hat));
  }

  for (const GroundTruth& t : scene.truth) {
    if (dict.find(t.label) != nullptr) rec.truth.push_back(t);
  }
  ClassifyOptions opts;
  opts.exclusion_radius = exclusion;
  if (config.known_count) opts.expected_count = rec.truth.size();
  DetectionReport report = classify_and_localize(planes, dict, opts);
  const bool matched = !rec.truth.empty() && mark_matches(report, rec.truth, spec.side, config.radius);
  rec.detections = std::move(report.detections);
  rec.success = matched && rec.converged;
  return rec;
}

std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double t = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / t;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / t;
  const double center = (p + z2 / (2.0 * t)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / t + z2 / (4.0 * t * t)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::vector<CurvePoint> aggregate(const ExperimentConfig& config, const std::vector<TrialRecord>& records) {
  const std::size_t n = config.scene.side * config.scene.side;
  std::vector<CurvePoint> points(config.rho_grid.size());
  for (std::size_t g = 0; g < points.size(); ++g) {
    points[g].rho = config.rho_grid[g];
    points[g].m = measurement_count(n, config.rho_grid[g]);
  }
  for (const TrialRecord& r : records) {
    if (r.grid_index >= points.size()) continue;
    points[r.grid_index].trials += 1;
    points[r.grid_index].successes += r.success ? 1 : 0;
  }
  for (CurvePoint& p : points) {
    p.probability = p.trials ? static_cast<double>(p.successes) / static_cast<double>(p.trials) : 0.0;
    std::tie(p.wilson_lo, p.wilson_hi) = wilson_interval(p.successes, p.trials);
    p.wilson_halfwidth = 0.5 * (p.wilson_hi - p.wilson_lo);
  }
  return points;
}

void write_curve_csv(std::ostream& os, const ExperimentConfig& config, const std::vector<CurvePoint>& points) {
  os << "rho,m,trials,successes,probability,wilson_lo,wilson_hi,snr_db,basis,mode\n";
  char buf[256];
  for (const CurvePoint& p : points) {
    std::snprintf(buf, sizeof buf, "%.17g,%zu,%zu,%zu,%.17g,%.17g,%.17g,", p.rho, p.m, p.trials, p.successes,
                  p.probability, p.wilson_lo, p.wilson_hi);
    os << buf << (std::isinf(config.snr_db) ? std::string("inf") : [&] {
      char s[64];
      std::snprintf(s, sizeof s, "%.17g", config.snr_db);
      return std::string(s);
    }()) << ',' << to_string(config.basis) << ',' << to_string(config.mode) << '\n';
  }
}

namespace {

constexpr const char* kLogHeader = "grid,trial,rho,m,seed,success,converged,iterations";

std::string fingerprint_line(const ExperimentConfig& config) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "# cpof-trials v1 fingerprint=%016llx",
                static_cast<unsigned long long>(config_fingerprint(config)));
  return buf;
}

void write_log_record(std::ostream& os, const TrialRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%zu,%llu,%d,%d,%d\n", r.grid_index, r.trial_index, r.rho, r.m,
                static_cast<unsigned long long>(r.seed), r.success ? 1 : 0, r.converged ? 1 : 0, r.iterations);
  os << buf;
}

std::vector<TrialRecord> load_log(const std::filesystem::path& path, const ExperimentConfig& config) {
  std::vector<TrialRecord> records;
  std::ifstream in(path);
  if (!in) return records;
  std::string line;
  if (!std::getline(in, line)) return records;
  if (line != fingerprint_line(config)) {
    throw ParameterError("trial log " + path.string() + " was written for a different configuration");
  }
  std::getline(in, line);  // column header
  while (std::getline(in, line)) {
    TrialRecord r;
    unsigned long long seed = 0;
    int success = 0;
    int converged = 0;
    int consumed = 0;
    if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%zu,%llu,%d,%d,%d%n", &r.grid_index, &r.trial_index, &r.rho, &r.m,
                    &seed, &success, &converged, &r.iterations, &consumed) != 8 ||
        static_cast<std::size_t>(consumed) != line.size()) {
      continue;  // torn write from an interrupted run
    }
    r.seed = seed;
    r.success = success != 0;
    r.converged = converged != 0;
    if (r.grid_index < config.rho_grid.size() && r.trial_index < config.trials_per_point) records.push_back(r);
  }
  return records;
}

}  // namespace

CurveRun run_curve(const ExperimentConfig& config, const CurveRunOptions& options, const TargetLibrary& targets) {
  validate(config);
  const std::size_t grid = config.rho_grid.size();
  const std::size_t total = grid * config.trials_per_point;

  CurveRun run;
  std::vector<char> done(total, 0);
  if (!options.trial_log.empty()) {
    for (TrialRecord& r : load_log(options.trial_log, config)) {
      char& slot = done[r.grid_index * config.trials_per_point + r.trial_index];
      if (slot) continue;
      slot = 1;
      run.records.push_back(std::move(r));
    }
    run.resumed_trials = run.records.size();
  }

  std::ofstream log;
  if (!options.trial_log.empty()) {
    // Rewrite so that a torn final line never merges with new records.
    log.open(options.trial_log, std::ios::trunc);
    if (!log) throw Error("cannot write trial log " + options.trial_log.string());
    log << fingerprint_line(config) << '\n' << kLogHeader << '\n';
    for (const TrialRecord& r : run.records) write_log_record(log, r);
    log.flush();
  }

  std::vector<std::size_t> pending;
  for (std::size_t k = 0; k < total; ++k) {
    if (!done[k]) pending.push_back(k);
  }

  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  std::size_t finished = 0;
  const std::size_t report_every = std::max<std::size_t>(1, pending.size() / 20);
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t job = next.fetch_add(1);
      if (job >= pending.size()) return;
      const std::size_t g = pending[job] / config.trials_per_point;
      const std::size_t t = pending[job] % config.trials_per_point;
      TrialRecord rec;
      try {
        rec = run_trial(config, g, t, targets);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        next = pending.size();
        return;
      }
      std::lock_guard lock(mutex);
      if (log.is_open()) {
        write_log_record(log, rec);
        log.flush();
      }
      run.records.push_back(std::move(rec));
      ++finished;
      if (options.progress && (finished % report_every == 0 || finished == pending.size())) {
        *options.progress << "[" << finished << "/" << pending.size() << "] trials done\n";
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(1, pending.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  run.new_trials = finished;
  std::sort(run.records.begin(), run.records.end(), [](const TrialRecord& a, const TrialRecord& b) {
    return std::tie(a.grid_index, a.trial_index) < std::tie(b.grid_index, b.trial_index);
  });
  run.points = aggregate(config, run.records);
  if (!options.curve_csv.empty()) {
    std::ofstream csv(options.curve_csv, std::ios::trunc);
    if (!csv) throw Error("cannot write curve CSV " + options.curve_csv.string());
    write_curve_csv(csv, config, run.points);
  }
  return run;
}

}  // namespace cpof
