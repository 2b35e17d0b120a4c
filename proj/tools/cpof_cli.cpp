#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cpof/detection.hpp"
#include "cpof/experiment.hpp"
#include "cpof/filtering.hpp"
#include "cpof/io.hpp"
#include "cpof/rng.hpp"
#include "cpof/run_config.hpp"
#include "cpof/scene.hpp"
#include "cpof/selftest.hpp"
#include "cpof/sensing.hpp"
#include "cpof/solver.hpp"
#include "cpof/xforms.hpp"

namespace fs = std::filesystem;
using namespace cpof;

namespace {

const std::map<std::string, BasisKind> kBases{
    {"wh", BasisKind::WalshHadamard}, {"noiselet", BasisKind::Noiselet}, {"dft", BasisKind::Fourier}};
const std::map<std::string, CorrelationMode> kModes{{"pof", CorrelationMode::POF}, {"ppc", CorrelationMode::PPC}};
const std::map<std::string, Direction> kDirections{{"forward", Direction::Forward}, {"adjoint", Direction::Adjoint}};

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Prints the resolved settings of a command before it runs.
class Resolved {
 public:
  explicit Resolved(std::string command) { std::cout << "# cpof " << command << '\n'; }
  template <typename T>
  Resolved& operator()(const std::string& key, const T& value) {
    std::cout << key << " = " << value << '\n';
    return *this;
  }
  Resolved& operator()(const std::string& key, double value) {
    std::cout << key << " = " << fmt(value) << '\n';
    return *this;
  }
  ~Resolved() { std::cout.flush(); }
};

bool has_magic(const fs::path& path, const char* magic) {
  std::ifstream in(path, std::ios::binary);
  char buf[4] = {};
  in.read(buf, 4);
  return in.gcount() == 4 && std::string(buf, 4) == magic;
}

Plane load_plane_or_image(const fs::path& path) {
  if (has_magic(path, "PCSP")) return load_plane(path);
  return to_complex(load_scene_pgm(path));
}

// "label=path"
std::pair<std::string, fs::path> split_assignment(const std::string& text, const char* what) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size()) {
    throw ParameterError(std::string(what) + " expects LABEL=PATH, got '" + text + "'");
  }
  return {text.substr(0, eq), text.substr(eq + 1)};
}

// "label@row,col"
GroundTruth parse_truth(const std::string& text) {
  const auto at = text.find('@');
  const auto comma = text.find(',', at == std::string::npos ? 0 : at);
  if (at == std::string::npos || comma == std::string::npos) {
    throw ParameterError("--truth expects LABEL@ROW,COL, got '" + text + "'");
  }
  GroundTruth t;
  t.label = text.substr(0, at);
  t.row = std::stoul(text.substr(at + 1, comma - at - 1));
  t.col = std::stoul(text.substr(comma + 1));
  return t;
}

Image reference_image(const std::string& spec) {
  if (spec.rfind("builtin:", 0) == 0) return builtin_target(spec.substr(8));
  return load_pgm(spec);
}

// ---- transform ---------------------------------------------------------

struct TransformArgs {
  std::string input;
  BasisKind basis = BasisKind::WalshHadamard;
  Direction direction = Direction::Forward;
  std::string out = "transform.pcsp";
};

int cmd_transform(const TransformArgs& a) {
  Resolved("transform")("input", a.input)("basis", to_string(a.basis))(
      "direction", a.direction == Direction::Forward ? "forward" : "adjoint")("out", a.out);
  const Plane in = load_plane_or_image(a.input);
  store_plane(a.out, transform_2d(in, a.basis, a.direction));
  return 0;
}

// ---- make-pof ----------------------------------------------------------

struct MakePofArgs {
  std::string reference;
  std::size_t side = 128;
  double zero_tol = kDefaultZeroTol;
  std::string out = "pof.pcsp";
};

int cmd_make_pof(const MakePofArgs& a) {
  Resolved("make-pof")("reference", a.reference)("side", a.side)("zero_tol", a.zero_tol)("out", a.out);
  const CirculantOperator pof = make_pof(embed_reference(reference_image(a.reference), a.side), a.zero_tol);
  store_plane(a.out, pof.transfer());
  return 0;
}

// ---- measure -----------------------------------------------------------

struct MeasureArgs {
  std::string scene;
  double rho = 16.0;
  BasisKind basis = BasisKind::WalshHadamard;
  CorrelationMode mode = CorrelationMode::POF;
  std::uint64_t seed = 1;
  double snr_db = std::numeric_limits<double>::infinity();
  bool binary_differential = false;
  double bias = 0.0;
  std::string out = "measurement.pcsm";
};

int cmd_measure(const MeasureArgs& a) {
  const Image scene = load_scene_pgm(a.scene);
  const std::size_t n = static_cast<std::size_t>(scene.size());
  const std::size_t m = measurement_count(n, a.rho);
  const std::uint64_t selection_seed = derive_seed({a.seed, 2});
  const std::uint64_t noise_seed = derive_seed({a.seed, 3});
  Resolved("measure")("scene", a.scene)("side", scene.rows())("rho", a.rho)("m", m)("basis", to_string(a.basis))(
      "mode", to_string(a.mode))("seed", a.seed)("selection_seed", selection_seed)("snr_db", a.snr_db)(
      "noise_seed", noise_seed)("binary_differential", a.binary_differential ? "true" : "false")("bias", a.bias)(
      "out", a.out);

  if (a.binary_differential && (a.basis != BasisKind::WalshHadamard || a.mode != CorrelationMode::POF)) {
    throw ParameterError("--binary-differential needs --basis wh and --mode pof");
  }
  const RowSelection selection = select_rows(a.basis, n, m, selection_seed);
  Measurement meas;
  if (a.binary_differential) {
    DifferentialOptions opts;
    opts.bias = a.bias;
    meas = normalize_differential(measure_differential_binary(scene, selection, opts));
  } else {
    meas = measure(to_complex(scene), selection, a.mode == CorrelationMode::PPC);
  }
  meas = add_noise(meas, a.snr_db, noise_seed);
  store_measurement(a.out, meas);
  return 0;
}

// ---- solve -------------------------------------------------------------

struct SolveArgs {
  std::string measurement;
  std::string pof;
  std::optional<double> tau;
  std::optional<double> sigma;
  double residual_floor_db = 30.0;
  SolverOptions solver;
  std::string out = "result.pcsr";
};

int cmd_solve(const SolveArgs& a) {
  const Measurement meas = load_measurement(a.measurement);
  const CirculantOperator pof(load_plane(a.pof));
  const double sigma = a.sigma.value_or(
      residual_target(meas.selection.m, meas.noise_sigma, ac_power(meas.samples), a.residual_floor_db));
  const TauMode tau = a.tau ? TauMode{FixedTau{*a.tau}} : TauMode{AutoTau{sigma}};
  {
    Resolved r("solve");
    r("measurement", a.measurement)("pof", a.pof)("basis", to_string(meas.selection.basis))("n", meas.selection.n)(
        "m", meas.selection.m)("selection_seed", meas.selection.seed);
    if (a.tau) {
      r("tau", *a.tau);
    } else {
      if (!a.sigma) r("residual_floor_db", a.residual_floor_db);
      r("sigma", sigma);
    }
    r("tol", a.solver.tol)("pg_tol", a.solver.pg_tol_factor)("max_iter", a.solver.max_iter)(
        "sigma_tol", a.solver.sigma_tol)("max_newton", a.solver.max_newton)("out", a.out);
  }
  const SolverResult result = solve_lasso(LassoProblem{SensingOperator(meas.selection, pof), meas.samples, tau}, a.solver);
  store_result(a.out, result);
  std::cout << "iterations = " << result.iterations << "\nnewton_steps = " << result.newton_steps
            << "\nresidual_norm = " << fmt(result.residual_norm) << "\ntau_used = " << fmt(result.tau_used)
            << "\nconverged = " << (result.converged ? "true" : "false") << '\n';
  return result.converged ? 0 : 3;
}

// ---- detect ------------------------------------------------------------

struct DetectArgs {
  std::vector<std::string> references;  // label=image
  std::vector<std::string> planes;      // label=result
  std::optional<std::size_t> count;
  double radius = 5.0;
  double exclusion_radius = 0.0;
  double min_score_ratio = 0.5;
  std::vector<std::string> truth;
  std::string out = "detections.csv";
};

int cmd_detect(const DetectArgs& a) {
  std::map<std::string, std::string> refs;
  for (const auto& item : a.references) {
    auto [label, path] = split_assignment(item, "--reference");
    refs[label] = path.string();
  }
  std::vector<std::pair<std::string, SolverResult>> results;
  for (const auto& item : a.planes) {
    auto [label, path] = split_assignment(item, "--plane");
    results.emplace_back(label, load_result(path));
  }
  if (results.empty()) throw ParameterError("detect: give at least one --plane LABEL=RESULT");
  const std::size_t side = static_cast<std::size_t>(results.front().second.s_hat.rows());

  Dictionary dict(side);
  std::vector<std::pair<std::string, CorrelationPlane>> planes;
  for (auto& [label, result] : results) {
    const auto it = refs.find(label);
    dict.add(label, reference_image(it == refs.end() ? "builtin:" + label : it->second));
    planes.emplace_back(label, std::move(result.s_hat));
  }
  ClassifyOptions opts;
  opts.expected_count = a.count;
  opts.exclusion_radius = a.exclusion_radius;
  opts.min_score_ratio = a.min_score_ratio;
  {
    Resolved r("detect");
    for (const auto& [label, plane] : planes) {
      const auto it = refs.find(label);
      r("plane." + label, it == refs.end() ? "builtin:" + label : it->second);
    }
    r("side", side)("count", a.count ? std::to_string(*a.count) : std::string("unknown"))("radius", a.radius)(
        "exclusion_radius", a.exclusion_radius > 0.0 ? a.exclusion_radius
                                                     : static_cast<double>(dict.max_target_dimension()))(
        "min_score_ratio", a.min_score_ratio)("out", a.out);
  }
  DetectionReport report = classify_and_localize(planes, dict, opts);
  if (!a.truth.empty()) {
    std::vector<GroundTruth> truth;
    for (const auto& t : a.truth) truth.push_back(parse_truth(t));
    const bool ok = mark_matches(report, truth, side, a.radius);
    std::cout << "success = " << (ok ? "true" : "false") << '\n';
  }
  std::ofstream os(a.out);
  if (!os) throw FormatError("cannot open " + a.out);
  write_report_csv(os, report);
  return 0;
}

// ---- reconstruct -------------------------------------------------------

struct ReconstructArgs {
  std::string result;
  std::string pof;
  bool direct = false;
  std::string measurement;
  SolverOptions solver;
  std::string out = "reconstruction.pgm";
  std::string plane_out;
};

int cmd_reconstruct(const ReconstructArgs& a) {
  Resolved("reconstruct")("mode", a.direct ? "direct" : "conjugate")("result", a.result)("pof", a.pof)(
      "measurement", a.measurement)("out", a.out)("plane_out", a.plane_out);
  Plane image;
  if (a.direct) {
    if (a.measurement.empty()) throw ParameterError("reconstruct --direct needs --measurement");
    const Measurement meas = load_measurement(a.measurement);
    image = reconstruct_scene(SolverResult{}, nullptr, ReconstructionMode::Direct, &meas, a.solver);
  } else {
    if (a.result.empty() || a.pof.empty()) throw ParameterError("reconstruct needs --result and --pof");
    const CirculantOperator pof(load_plane(a.pof));
    image = reconstruct_scene(load_result(a.result), &pof, ReconstructionMode::Conjugate);
  }
  if (!a.plane_out.empty()) store_plane(a.plane_out, image);
  const PgmScaling scaling = store_scaled_pgm(a.out, image.real());
  std::cout << "scale = " << fmt(scaling.scale) << "\noffset = " << fmt(scaling.offset) << '\n';
  return 0;
}

// ---- experiment --------------------------------------------------------

struct ExperimentArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<double> rho;
  std::optional<std::string> basis;
  std::optional<std::string> mode;
  std::optional<double> snr_db;
  std::optional<std::size_t> trials;
  std::optional<double> radius;
  bool binary_differential = false;
  std::size_t workers = 1;
  std::string out = "curve.csv";
};

int cmd_experiment(const ExperimentArgs& a) {
  ExperimentConfig config;
  try {
    config = load_run_config(a.config);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << a.config << ": " << e.what() << '\n';
    return 1;
  }
  if (a.seed) config.base_seed = *a.seed;
  if (!a.rho.empty()) config.rho_grid = a.rho;
  if (a.basis) config.basis = kBases.at(*a.basis);
  if (a.mode) config.mode = kModes.at(*a.mode);
  if (a.snr_db) config.snr_db = *a.snr_db;
  if (a.trials) config.trials_per_point = *a.trials;
  if (a.radius) config.radius = *a.radius;
  if (a.binary_differential) config.binary_differential = true;
  try {
    validate(config);
  } catch (const ParameterError& e) {
    std::cerr << "error: " << a.config << ": " << e.what() << '\n';
    return 1;
  }

  const fs::path curve = a.out;
  const fs::path log = fs::path(a.out).concat(".trials");
  std::cout << "# cpof experiment\n";
  write_run_config(std::cout, config);
  std::cout << "workers = " << a.workers << "\nout = " << curve.string() << "\ntrial_log = " << log.string() << '\n';
  for (std::size_t g = 0; g < config.rho_grid.size(); ++g) {
    std::cout << "# grid " << g << ": rho = " << fmt(config.rho_grid[g])
              << ", m = " << measurement_count(config.scene.side * config.scene.side, config.rho_grid[g])
              << ", first trial seed = " << trial_seed(config.base_seed, g, 0) << '\n';
  }
  std::cout.flush();

  CurveRunOptions opts;
  opts.workers = a.workers;
  opts.trial_log = log;
  opts.curve_csv = curve;
  opts.progress = &std::cerr;
  const CurveRun run = run_curve(config, opts);
  write_curve_csv(std::cout, config, run.points);
  std::cout << "resumed_trials = " << run.resumed_trials << "\nnew_trials = " << run.new_trials << '\n';
  return run.resumed_trials > 0 && run.new_trials > 0 ? 2 : 0;
}

// ---- selftest ----------------------------------------------------------

int cmd_selftest(bool corrupt) {
  Resolved("selftest")("corrupt_transfer", corrupt ? "true" : "false");
  SelftestOptions opts;
  opts.corrupt_transfer = corrupt;
  return run_selftest(std::cout, opts) ? 0 : 1;
}

void add_solver_flags(CLI::App* cmd, SolverOptions& s) {
  cmd->add_option("--tol", s.tol, "Relative residual change that ends an SPG run")->capture_default_str();
  cmd->add_option("--pg-tol", s.pg_tol_factor, "Projected-gradient tolerance, relative to ||A^H y||")
      ->capture_default_str();
  cmd->add_option("--max-iter", s.max_iter, "SPG iterations per fixed-tau subproblem")->capture_default_str();
  cmd->add_option("--sigma-tol", s.sigma_tol, "Pareto root tolerance, relative to ||y||")->capture_default_str();
  cmd->add_option("--max-newton", s.max_newton, "Newton steps on the Pareto curve")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressive phase-only-filter matched filtering"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  TransformArgs transform;
  auto* c_transform = app.add_subcommand("transform", "2D unitary transform of a PGM or complex plane");
  c_transform->add_option("input", transform.input, "Input PGM or PCSP file")->required();
  c_transform->add_option("--basis", transform.basis, "Basis")
      ->transform(CLI::CheckedTransformer(kBases, CLI::ignore_case))
      ->default_str("wh");
  c_transform->add_option("--direction", transform.direction, "forward or adjoint")
      ->transform(CLI::CheckedTransformer(kDirections, CLI::ignore_case))
      ->default_str("forward");
  c_transform->add_option("--out", transform.out, "Output PCSP file")->capture_default_str();

  MakePofArgs pof;
  auto* c_pof = app.add_subcommand("make-pof", "Phase-only filter transfer function from a reference");
  c_pof->add_option("reference", pof.reference, "Reference PGM, or builtin:LABEL")->required();
  c_pof->add_option("--side", pof.side, "Scene side the reference is embedded in")->capture_default_str();
  c_pof->add_option("--zero-tol", pof.zero_tol, "Relative modulus below which a bin is set to 1")
      ->capture_default_str();
  c_pof->add_option("--out", pof.out, "Output PCSP file")->capture_default_str();

  MeasureArgs measure_args;
  auto* c_measure = app.add_subcommand("measure", "Simulated compressive measurement of a scene");
  c_measure->add_option("scene", measure_args.scene, "Scene PGM (square, power-of-two side)")->required();
  c_measure->add_option("--rho", measure_args.rho, "Compression ratio n/m")->capture_default_str();
  c_measure->add_option("--basis", measure_args.basis, "Measurement basis")
      ->transform(CLI::CheckedTransformer(kBases, CLI::ignore_case))
      ->default_str("wh");
  c_measure->add_option("--mode", measure_args.mode, "pof, or ppc to measure the whitened scene")
      ->transform(CLI::CheckedTransformer(kModes, CLI::ignore_case))
      ->default_str("pof");
  c_measure->add_option("--seed", measure_args.seed, "Seed for row selection and noise")->capture_default_str();
  c_measure->add_option("--snr-db", measure_args.snr_db, "Measurement SNR in dB (inf: noiseless)")
      ->default_str("inf");
  c_measure->add_flag("--binary-differential", measure_args.binary_differential,
                      "Binary {0,1} patterns with differential readout");
  c_measure->add_option("--bias", measure_args.bias, "Detector offset for --binary-differential")
      ->capture_default_str();
  c_measure->add_option("--out", measure_args.out, "Output PCSM file")->capture_default_str();

  SolveArgs solve;
  auto* c_solve = app.add_subcommand("solve", "Recover the correlation plane from a measurement");
  c_solve->add_option("measurement", solve.measurement, "PCSM file")->required();
  c_solve->add_option("--pof", solve.pof, "POF transfer function (PCSP, from make-pof)")->required();
  auto* tau_opt = c_solve->add_option("--tau", solve.tau, "Fixed l1 radius");
  auto* sigma_opt = c_solve->add_option("--sigma", solve.sigma, "Target residual norm for the Pareto search")
                        ->default_str("from noise level and residual floor")
                        ->excludes(tau_opt);
  c_solve->add_option("--residual-floor-db", solve.residual_floor_db,
                      "Residual floor as SNR against the sample AC power; inf gives exact basis pursuit")
      ->capture_default_str()
      ->excludes(tau_opt)
      ->excludes(sigma_opt);
  add_solver_flags(c_solve, solve.solver);
  c_solve->add_option("--out", solve.out, "Output PCSR file")->capture_default_str();

  DetectArgs detect;
  auto* c_detect = app.add_subcommand("detect", "Classify and localize targets from solved planes");
  c_detect->add_option("--plane", detect.planes, "LABEL=RESULT.pcsr, one per dictionary entry")->required();
  c_detect->add_option("--reference", detect.references,
                       "LABEL=REFERENCE.pgm (default: the built-in target of that label)");
  c_detect->add_option("--count", detect.count, "Known number of targets (default: unknown)");
  c_detect->add_option("--radius", detect.radius, "Localization tolerance in pixels")->capture_default_str();
  c_detect->add_option("--exclusion-radius", detect.exclusion_radius,
                       "Non-maximum suppression radius (0: largest target dimension)")
      ->capture_default_str();
  c_detect->add_option("--min-score-ratio", detect.min_score_ratio, "Peak threshold when the count is unknown")
      ->capture_default_str();
  c_detect->add_option("--truth", detect.truth, "LABEL@ROW,COL ground truth for scoring");
  c_detect->add_option("--out", detect.out, "Detection CSV")->capture_default_str();

  ReconstructArgs recon;
  auto* c_recon = app.add_subcommand("reconstruct", "Scene estimate from a solved plane, or the direct baseline");
  c_recon->add_option("--result", recon.result, "PCSR file (conjugate mode)");
  c_recon->add_option("--pof", recon.pof, "POF transfer function (conjugate mode)");
  c_recon->add_flag("--direct", recon.direct, "Pixel-sparsity lasso on the measurement instead");
  c_recon->add_option("--measurement", recon.measurement, "PCSM file (direct mode)");
  add_solver_flags(c_recon, recon.solver);
  c_recon->add_option("--out", recon.out, "Scaled 8-bit PGM")->capture_default_str();
  c_recon->add_option("--plane-out", recon.plane_out, "Also write the complex estimate as PCSP");

  ExperimentArgs exp;
  auto* c_exp = app.add_subcommand("experiment", "Monte-Carlo detection curve from a run config");
  c_exp->add_option("config", exp.config, "Run config (key = value lines)")->required();
  c_exp->add_option("--seed", exp.seed, "Override base_seed");
  c_exp->add_option("--rho", exp.rho, "Override rho_grid")->delimiter(',');
  c_exp->add_option("--basis", exp.basis, "Override basis")->check(CLI::IsMember({"wh", "noiselet", "dft"}));
  c_exp->add_option("--mode", exp.mode, "Override mode")->check(CLI::IsMember({"pof", "ppc"}));
  c_exp->add_option("--snr-db", exp.snr_db, "Override snr_db");
  c_exp->add_option("--trials", exp.trials, "Override trials_per_point");
  c_exp->add_option("--radius", exp.radius, "Override the localization tolerance");
  c_exp->add_flag("--binary-differential", exp.binary_differential, "Binary differential measurement model");
  c_exp->add_option("--workers", exp.workers, "Worker threads")->capture_default_str();
  c_exp->add_option("--out", exp.out, "Curve CSV; the trial log is written next to it as OUT.trials")
      ->capture_default_str();

  bool corrupt = false;
  auto* c_self = app.add_subcommand("selftest", "Fast invariant checks");
  c_self->add_flag("--corrupt-transfer", corrupt, "Negative control: modulus-0.5 transfer in the unitarity check");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_transform->parsed()) return cmd_transform(transform);
    if (c_pof->parsed()) return cmd_make_pof(pof);
    if (c_measure->parsed()) return cmd_measure(measure_args);
    if (c_solve->parsed()) return cmd_solve(solve);
    if (c_detect->parsed()) return cmd_detect(detect);
    if (c_recon->parsed()) return cmd_reconstruct(recon);
    if (c_exp->parsed()) return cmd_experiment(exp);
    if (c_self->parsed()) return cmd_selftest(corrupt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
