#include "cpof/selftest.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "cpof/filtering.hpp"
#include "cpof/rng.hpp"
#include "cpof/sensing.hpp"
#include "cpof/solver.hpp"
#include "cpof/xforms.hpp"

namespace cpof {

namespace {

using Dense = Eigen::MatrixXcd;

CVector random_vector(Random& rng, Eigen::Index n) {
  CVector v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = {rng.normal(), rng.normal()};
  return v;
}

Dense dense_basis(BasisKind basis, Eigen::Index n) {
  if (basis == BasisKind::Fourier) {
    Dense f(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index k = 0; k < n; ++k) {
        f(j, k) = std::polar(1.0 / std::sqrt(double(n)), -2.0 * M_PI * double(j * k % n) / double(n));
      }
    }
    return f;
  }
  Dense kernel(2, 2);
  if (basis == BasisKind::WalshHadamard) {
    kernel << 1, 1, 1, -1;
    kernel /= std::sqrt(2.0);
  } else {
    const std::complex<double> p(0.5, -0.5), q(0.5, 0.5);
    kernel << p, q, q, p;
  }
  Dense m = Dense::Ones(1, 1);
  while (m.rows() < n) {
    const Eigen::Index h = m.rows();
    Dense next(2 * h, 2 * h);
    next << kernel(0, 0) * m, kernel(0, 1) * m, kernel(1, 0) * m, kernel(1, 1) * m;
    m = std::move(next);
  }
  return m;
}

// Soft-threshold level by bisection on sum(max(|v| - l, 0)) = tau.
CVector project_bisection(const CVector& v, double tau) {
  const Eigen::VectorXd a = v.cwiseAbs();
  if (a.sum() <= tau) return v;
  double lo = 0.0, hi = a.maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    ((a.array() - mid).max(0.0).sum() > tau ? lo : hi) = mid;
  }
  const double l = 0.5 * (lo + hi);
  CVector out(v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) out[k] = a[k] > l ? v[k] * ((a[k] - l) / a[k]) : 0.0;
  return out;
}

}  // namespace

bool run_selftest(std::ostream& os, const SelftestOptions& options) {
  bool all = true;
  Random rng(20240601);
  auto check = [&](const std::string& name, const std::function<bool()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      os << "  (" << e.what() << ")\n";
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    os << (ok ? "PASS " : "FAIL ") << name << " (" << static_cast<long>(ms) << " ms)\n";
    all = all && ok;
  };

  const BasisKind bases[] = {BasisKind::WalshHadamard, BasisKind::Noiselet, BasisKind::Fourier};

  check("transform unitarity n=2..4096 and 2D 128x128", [&] {
    for (BasisKind b : bases) {
      for (Eigen::Index n = 2; n <= 4096; n *= 2) {
        const CVector v = random_vector(rng, n);
        const CVector back = transform_1d(transform_1d(v, b, Direction::Forward), b, Direction::Adjoint);
        if ((back - v).cwiseAbs().maxCoeff() > 1e-10 * v.cwiseAbs().maxCoeff()) return false;
      }
      Plane img = to_plane(random_vector(rng, 128 * 128), 128);
      Plane back = transform_2d(transform_2d(img, b, Direction::Forward), b, Direction::Adjoint);
      if ((back - img).cwiseAbs().maxCoeff() > 1e-10 * img.cwiseAbs().maxCoeff()) return false;
    }
    return true;
  });

  check("fast transforms match dense matrices n<=64", [&] {
    for (BasisKind b : bases) {
      for (Eigen::Index n = 2; n <= 64; n *= 2) {
        const CVector v = random_vector(rng, n);
        const CVector fast = transform_1d(v, b, Direction::Forward);
        if ((fast - dense_basis(b, n) * v).cwiseAbs().maxCoeff() > 1e-10) return false;
      }
    }
    return true;
  });

  check("POF unitarity T^H T = I", [&] {
    Plane ref = to_plane(random_vector(rng, 64 * 64), 64);
    CirculantOperator pof = make_pof(ref);
    if (options.corrupt_transfer) pof = CirculantOperator(pof.transfer() * 0.5);
    const Plane v = to_plane(random_vector(rng, 64 * 64), 64);
    const Plane back = apply_circulant(pof, apply_circulant(pof, v, Direction::Forward), Direction::Adjoint);
    return (back - v).cwiseAbs().maxCoeff() <= 1e-10;
  });

  check("semi-unitarity A A^H = I and adjoint identity", [&] {
    const std::size_t side = 32;
    const CirculantOperator pof = make_pof(to_plane(random_vector(rng, side * side), side));
    for (BasisKind b : bases) {
      const SensingOperator op(select_rows(b, side * side, 128, rng.next()), pof);
      const CVector y = random_vector(rng, 128);
      if ((op.apply(op.adjoint(y)) - y).cwiseAbs().maxCoeff() > 1e-10) return false;
      const CVector s = random_vector(rng, side * side);
      const std::complex<double> lhs = op.apply(s).dot(y);
      const std::complex<double> rhs = s.dot(op.adjoint(y));
      if (std::abs(lhs - rhs) > 1e-10 * std::abs(lhs)) return false;
    }
    return true;
  });

  check("l1-ball projection vs bisection oracle", [&] {
    CVector ex(2);
    ex << 3.0, 1.0;
    const CVector got = project_l1_ball(ex, 2.0);
    if (got[0] != std::complex<double>(2.0, 0.0) || got[1] != std::complex<double>(0.0, 0.0)) return false;
    for (int i = 0; i < 500; ++i) {
      const CVector v = random_vector(rng, 1 + static_cast<Eigen::Index>(rng.below(64)));
      const double tau = rng.uniform() * v.cwiseAbs().sum();
      if ((project_l1_ball(v, tau) - project_bisection(v, tau)).cwiseAbs().maxCoeff() > 1e-12) return false;
    }
    return true;
  });

  check("circulant application matches dense block-circulant matrix (8x8)", [&] {
    const Eigen::Index side = 8, n = side * side;
    Plane transfer = to_plane(random_vector(rng, n), side);
    const CirculantOperator op(transfer);
    // Point spread function h = F^H transfer; T_{(a,b),(c,d)} = h[(a-c) mod, (b-d) mod] / sqrt(n).
    const Plane h = transform_2d(transfer, BasisKind::Fourier, Direction::Adjoint);
    Dense t(n, n);
    for (Eigen::Index a = 0; a < side; ++a)
      for (Eigen::Index b = 0; b < side; ++b)
        for (Eigen::Index c = 0; c < side; ++c)
          for (Eigen::Index d = 0; d < side; ++d)
            t(a * side + b, c * side + d) = h((a - c + side) % side, (b - d + side) % side) / std::sqrt(double(n));
    const Plane v = to_plane(random_vector(rng, n), side);
    const CVector fast = flat(apply_circulant(op, v, Direction::Forward));
    return (fast - t * flat(v)).cwiseAbs().maxCoeff() <= 1e-10;
  });

  check("unitary lasso fast path (m = n)", [&] {
    const std::size_t side = 16;
    const CirculantOperator pof = make_pof(to_plane(random_vector(rng, side * side), side));
    LassoProblem p{SensingOperator(select_rows(BasisKind::WalshHadamard, side * side, side * side, 7), pof),
                   random_vector(rng, side * side), FixedTau{}};
    std::get<FixedTau>(p.tau).tau = l1_norm(p.op.adjoint(p.y));
    const SolverResult r = solve_lasso(p);
    return r.converged && r.iterations <= 5 && r.residual_norm <= 1e-8 * p.y.norm();
  });

  return all;
}

}  // namespace cpof
