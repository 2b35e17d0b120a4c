#pragma once

#include <cstddef>
#include <variant>

#include "cpof/sensing.hpp"
#include "cpof/types.hpp"

namespace cpof {

struct SolverOptions {
  double tol = 1e-6;             // relative residual change between SPG iterations
  double pg_tol_factor = 1e-6;   // projected-gradient threshold, times ||A^H y||_2
  int max_iter = 500;            // SPG iterations per fixed-tau subproblem
  double sigma_tol = 1e-4;       // Pareto root: |phi(tau) - sigma| <= sigma_tol ||y||_2
  int max_newton = 50;
  int nonmonotone_window = 10;
  double sufficient_decrease = 1e-4;
};

struct FixedTau {
  double tau = 0.0;
};
/// Pick tau by Newton root-finding on the Pareto curve so that ||A s - y|| = sigma.
struct AutoTau {
  double sigma = 0.0;
};
using TauMode = std::variant<FixedTau, AutoTau>;

struct LassoProblem {
  SensingOperator op;
  CVector y;
  TauMode tau = AutoTau{};
};

struct SolverResult {
  CorrelationPlane s_hat;
  double residual_norm = 0.0;
  double tau_used = 0.0;
  int iterations = 0;
  int newton_steps = 0;
  bool converged = false;
};

/// Generic solver output on flat vectors.
struct LassoSolution {
  CVector s;
  double residual_norm = 0.0;
  double tau_used = 0.0;
  int iterations = 0;
  int newton_steps = 0;
  bool converged = false;
};

/// Euclidean projection onto {u : sum |u_k| <= tau}. Phases are kept; the
/// moduli are soft-thresholded at the level found by the sorted-cumulative-sum rule.
CVector project_l1_ball(const CVector& v, double tau);

double l1_norm(const CVector& v);

SolverResult solve_lasso(const LassoProblem& problem, const SolverOptions& opts = {});

enum class ReconstructionMode { Conjugate, Direct };

/// Conjugate: T_POF^H s_hat. Direct: lasso with A = M (pixel sparsity baseline),
/// which needs the original measurement.
Plane reconstruct_scene(const SolverResult& result, const CirculantOperator* pof, ReconstructionMode mode,
                        const Measurement* measurement = nullptr, const SolverOptions& opts = {});

}  // namespace cpof

#include "cpof/spg.hpp"
