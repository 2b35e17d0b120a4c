#pragma once

// Matrix-free spectral projected gradient for
//   min ||A s - y||_2  subject to  ||s||_1 <= tau
// with Newton root-finding on the Pareto curve phi(tau) = ||A s_tau - y||_2.
//
// `Op` needs: Eigen::Index cols() const; CVector apply(const CVector&) const;
// CVector adjoint(const CVector&) const.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <variant>

#include "cpof/types.hpp"

namespace cpof {

namespace detail {

struct SpgState {
  CVector s;
  CVector r;  // y - A s
  int iterations = 0;
};

// Runs SPG at fixed tau from the current state for at most opts.max_iter
// iterations. Returns true on convergence, false when the budget ran out.
// With `root` set (Auto mode) it also returns once the residual hits the
// target (root->sigma within root->tol), or once the duality gap is small
// next to the remaining distance from the target, so tau can move early.
struct RootTarget {
  double sigma;
  double tol;  // absolute tolerance on |phi - sigma|
};

template <typename Op>
bool spg_fixed_tau(const Op& op, const CVector& y, double tau, double pg_tol, const SolverOptions& opts,
                   SpgState& st, const RootTarget* root = nullptr) {
  int budget = opts.max_iter;
  constexpr double kStepMin = 1e-10;
  constexpr double kStepMax = 1e10;
  constexpr int kMaxBacktracks = 30;

  st.s = project_l1_ball(st.s, tau);
  st.r = y - op.apply(st.s);
  double f = 0.5 * st.r.squaredNorm();
  CVector g = -op.adjoint(st.r);
  std::deque<double> history{f};
  double alpha = 1.0;

  for (;;) {
    const double pg = (project_l1_ball(st.s - g, tau) - st.s).norm();
    // A warm start after a tau update can look optimal to the loose tests
    // while the residual target is still far; take one step first.
    const bool stepped = root == nullptr || budget < opts.max_iter;
    if (pg < pg_tol && stepped) return true;
    if (root != nullptr) {
      const double r_norm = std::sqrt(2.0 * f);
      if (std::abs(r_norm - root->sigma) <= root->tol) return true;
      const double gap = (st.r.adjoint() * (st.r - y)).value().real() + tau * g.cwiseAbs().maxCoeff();
      const double obj_err = std::abs(f - 0.5 * root->sigma * root->sigma) / std::max(1.0, f);
      if (std::abs(gap) / std::max(1.0, f) <= std::max(opts.tol, obj_err) && stepped) return true;
    }
    if (budget <= 0) return false;

    const double f_max = *std::max_element(history.begin(), history.end());
    double step = alpha;
    CVector s_new;
    CVector r_new;
    double f_new = 0.0;
    for (int ls = 0;; ++ls) {
      s_new = project_l1_ball(st.s - step * g, tau);
      const double gtd = (g.adjoint() * (s_new - st.s)).value().real();
      r_new = y - op.apply(s_new);
      f_new = 0.5 * r_new.squaredNorm();
      if (f_new <= f_max + opts.sufficient_decrease * gtd || ls == kMaxBacktracks) break;
      step *= 0.5;
    }
    --budget;
    ++st.iterations;

    CVector g_new = -op.adjoint(r_new);
    const CVector ds = s_new - st.s;
    const double sts = ds.squaredNorm();
    const double sty = (ds.adjoint() * (g_new - g)).value().real();
    alpha = sty <= 0.0 ? kStepMax : std::clamp(sts / sty, kStepMin, kStepMax);

    const double r_old = st.r.norm();
    const double r_cur = r_new.norm();
    st.s = std::move(s_new);
    st.r = std::move(r_new);
    g = std::move(g_new);
    f = f_new;
    history.push_back(f);
    if (static_cast<int>(history.size()) > opts.nonmonotone_window) history.pop_front();

    const double change = std::abs(r_cur - r_old) / std::max(r_old, std::numeric_limits<double>::min());
    if (change < opts.tol) return true;
  }
}

}  // namespace detail

template <typename Op>
LassoSolution spg_lasso(const Op& op, const CVector& y, const TauMode& mode, const SolverOptions& opts = {}) {
  const bool auto_tau = std::holds_alternative<AutoTau>(mode);
  const double sigma = auto_tau ? std::get<AutoTau>(mode).sigma : 0.0;
  double tau = auto_tau ? 0.0 : std::get<FixedTau>(mode).tau;
  if (tau < 0.0) throw ParameterError("solve_lasso: tau must be nonnegative");
  if (sigma < 0.0) throw ParameterError("solve_lasso: sigma must be nonnegative");

  LassoSolution out;
  out.s = CVector::Zero(op.cols());
  out.tau_used = tau;
  const double y_norm = y.norm();
  if (y_norm == 0.0) {
    out.converged = true;
    return out;
  }

  const double pg_tol = opts.pg_tol_factor * op.adjoint(y).norm();
  detail::SpgState st{out.s, y, 0};
  const detail::RootTarget root{sigma, opts.sigma_tol * y_norm};

  if (!auto_tau) {
    out.converged = detail::spg_fixed_tau(op, y, tau, pg_tol, opts, st);
  } else {
    for (;;) {
      if (tau > 0.0 && !detail::spg_fixed_tau(op, y, tau, pg_tol, opts, st, &root)) break;
      const double phi = st.r.norm();
      if (std::abs(phi - sigma) <= opts.sigma_tol * y_norm) {
        out.converged = true;
        break;
      }
      if (out.newton_steps >= opts.max_newton) break;
      const double dual = op.adjoint(st.r).cwiseAbs().maxCoeff();
      if (dual <= 0.0) break;
      // phi'(tau) = -||A^H r||_inf / ||r||_2
      tau = std::max(0.0, tau + (phi - sigma) * phi / dual);
      ++out.newton_steps;
    }
  }

  out.s = std::move(st.s);
  out.tau_used = tau;
  out.iterations = st.iterations;
  out.residual_norm = (op.apply(out.s) - y).norm();
  return out;
}

}  // namespace cpof
