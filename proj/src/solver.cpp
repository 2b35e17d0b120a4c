#include "cpof/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace cpof {

double l1_norm(const CVector& v) { return v.cwiseAbs().sum(); }

CVector project_l1_ball(const CVector& v, double tau) {
  if (tau < 0.0) throw ParameterError("project_l1_ball: tau must be nonnegative");
  const Eigen::VectorXd moduli = v.cwiseAbs2().cwiseSqrt();
  const double total = moduli.sum();
  if (total <= tau) return v;
  if (tau == 0.0) return CVector::Zero(v.size());

  // Michelot's fixed point: (sum over a superset of the support - tau) / its
  // size bounds the threshold from below, so entries at or below it drop out.
  // Repeating until the set stops shrinking gives the exact threshold.
  std::vector<double> active(moduli.data(), moduli.data() + moduli.size());
  double threshold = (total - tau) / static_cast<double>(active.size());
  for (;;) {
    std::size_t kept = 0;
    double sum = 0.0;
    for (const double a : active) {
      if (a > threshold) {
        active[kept++] = a;
        sum += a;
      }
    }
    const bool stable = kept == active.size();
    active.resize(kept);
    threshold = (sum - tau) / static_cast<double>(kept);
    if (stable) break;
  }

  CVector out(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    const double mag = moduli[k];
    out[k] = mag > threshold ? v[k] * ((mag - threshold) / mag) : std::complex<double>(0.0, 0.0);
  }
  return out;
}

SolverResult solve_lasso(const LassoProblem& problem, const SolverOptions& opts) {
  if (problem.y.size() != problem.op.rows()) {
    throw SizeError("solve_lasso: measurement has " + std::to_string(problem.y.size()) + " samples, operator " +
                    std::to_string(problem.op.rows()) + " rows");
  }
  LassoSolution sol = spg_lasso(problem.op, problem.y, problem.tau, opts);
  SolverResult result;
  result.s_hat = to_plane(sol.s, problem.op.side());
  result.residual_norm = sol.residual_norm;
  result.tau_used = sol.tau_used;
  result.iterations = sol.iterations;
  result.newton_steps = sol.newton_steps;
  result.converged = sol.converged;
  return result;
}

Plane reconstruct_scene(const SolverResult& result, const CirculantOperator* pof, ReconstructionMode mode,
                        const Measurement* measurement, const SolverOptions& opts) {
  if (mode == ReconstructionMode::Conjugate) {
    if (pof == nullptr) throw ParameterError("reconstruct_scene: conjugate mode needs the sensing POF");
    return apply_circulant(*pof, result.s_hat, Direction::Adjoint);
  }
  if (measurement == nullptr) throw ParameterError("reconstruct_scene: direct mode needs the measurement");
  const double sigma = std::sqrt(static_cast<double>(measurement->selection.m)) * measurement->noise_sigma;
  LassoProblem direct{SensingOperator(measurement->selection, std::nullopt), measurement->samples, AutoTau{sigma}};
  return solve_lasso(direct, opts).s_hat;
}

}  // namespace cpof
