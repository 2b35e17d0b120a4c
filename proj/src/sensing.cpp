#include "cpof/sensing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "cpof/rng.hpp"
#include "cpof/xforms.hpp"

namespace cpof {

RowSelection select_rows(BasisKind basis, std::uint64_t n, std::uint64_t m, std::uint64_t seed) {
  if (!is_power_of_two(n)) throw SizeError("select_rows: n = " + std::to_string(n) + " is not a power of two");
  if (m < 1 || m > n) {
    throw ParameterError("select_rows: need 1 <= m <= n, got m = " + std::to_string(m) + ", n = " + std::to_string(n));
  }
  std::vector<std::uint64_t> slots(n);
  std::iota(slots.begin(), slots.end(), std::uint64_t{0});
  Random rng(seed);
  for (std::uint64_t i = 0; i < m; ++i) {
    const std::uint64_t j = i + rng.below(n - i);
    std::swap(slots[i], slots[j]);
  }
  slots.resize(m);
  std::sort(slots.begin(), slots.end());
  return RowSelection{basis, std::move(slots), seed, n, m};
}

namespace {

std::size_t side_for(std::uint64_t n) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (side * side != n || !is_power_of_two(side)) {
    throw SizeError("basis size " + std::to_string(n) + " is not the square of a power of two");
  }
  return side;
}

void require_scene_size(const Plane& scene, const RowSelection& selection, const char* what) {
  if (scene.rows() != scene.cols() || static_cast<std::uint64_t>(scene.size()) != selection.n) {
    throw SizeError(std::string(what) + ": scene " + std::to_string(scene.rows()) + "x" +
                    std::to_string(scene.cols()) + " does not match n = " + std::to_string(selection.n));
  }
}

CVector gather(const Plane& coeffs, const std::vector<std::uint64_t>& indices) {
  CVector out(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) out[static_cast<Eigen::Index>(i)] = coeffs.data()[indices[i]];
  return out;
}

}  // namespace

Measurement measure(const Plane& scene, const RowSelection& selection, bool whitened) {
  require_scene_size(scene, selection, "measure");
  Plane x = whitened ? whiten(scene) : scene;
  transform_2d_inplace<double>(x.data(), static_cast<std::size_t>(x.rows()), selection.basis, Direction::Forward);
  Measurement meas;
  meas.samples = gather(x, selection.indices);
  meas.selection = selection;
  meas.whitened = whitened;
  return meas;
}

SensingOperator::SensingOperator(RowSelection selection, std::optional<CirculantOperator> pof)
    : selection_(std::move(selection)), pof_(std::move(pof)), side_(side_for(selection_.n)) {
  if (pof_ && pof_->size() != selection_.n) {
    throw SizeError("SensingOperator: POF side " + std::to_string(pof_->side()) + " does not match n = " +
                    std::to_string(selection_.n));
  }
}

CVector SensingOperator::apply(const CVector& s) const {
  if (static_cast<std::uint64_t>(s.size()) != selection_.n) {
    throw SizeError("apply_A: expected " + std::to_string(selection_.n) + " values, got " + std::to_string(s.size()));
  }
  Plane x = to_plane(s, side_);
  if (pof_) x = apply_circulant(*pof_, x, Direction::Adjoint);
  transform_2d_inplace<double>(x.data(), side_, selection_.basis, Direction::Forward);
  return gather(x, selection_.indices);
}

CVector SensingOperator::adjoint(const CVector& y) const {
  if (static_cast<std::uint64_t>(y.size()) != selection_.m) {
    throw SizeError("apply_A_adjoint: expected " + std::to_string(selection_.m) + " samples, got " +
                    std::to_string(y.size()));
  }
  const auto s = static_cast<Eigen::Index>(side_);
  Plane x = Plane::Zero(s, s);
  for (std::size_t i = 0; i < selection_.indices.size(); ++i) {
    x.data()[selection_.indices[i]] = y[static_cast<Eigen::Index>(i)];
  }
  transform_2d_inplace<double>(x.data(), side_, selection_.basis, Direction::Adjoint);
  if (pof_) x = apply_circulant(*pof_, x, Direction::Forward);
  return flat(x);
}

CVector apply_A(const SensingOperator& op, const CorrelationPlane& s) {
  if (static_cast<std::size_t>(s.rows()) != op.side() || s.rows() != s.cols()) {
    throw SizeError("apply_A: plane shape does not match operator side " + std::to_string(op.side()));
  }
  return op.apply(flat(s));
}

CorrelationPlane apply_A_adjoint(const SensingOperator& op, const CVector& y) {
  return to_plane(op.adjoint(y), op.side());
}

double ac_power(const CVector& samples) {
  if (samples.size() == 0) return 0.0;
  const std::complex<double> mean = samples.mean();
  return (samples.array() - mean).abs2().mean();
}

Measurement add_noise(const Measurement& meas, double snr_db, std::uint64_t noise_seed) {
  Measurement out = meas;
  out.snr_db = snr_db;
  out.noise_seed = noise_seed;
  out.noise_sigma = 0.0;
  if (std::isinf(snr_db) && snr_db > 0.0) return out;
  const auto m = out.samples.size();
  if (m == 0) return out;

  const double sigma = std::sqrt(ac_power(out.samples) * std::pow(10.0, -snr_db / 10.0));
  out.noise_sigma = sigma;

  Random rng(noise_seed);
  if (out.selection.basis == BasisKind::WalshHadamard) {
    for (Eigen::Index i = 0; i < m; ++i) out.samples[i] += sigma * rng.normal();
  } else {
    const double component = sigma / std::sqrt(2.0);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double re = rng.normal();
      const double im = rng.normal();
      out.samples[i] += std::complex<double>(component * re, component * im);
    }
  }
  return out;
}

Measurement quantize(const Measurement& meas, int bits) {
  if (bits < 1 || bits > 52) throw ParameterError("quantize: bits must be in [1, 52]");
  Measurement out = meas;
  if (out.samples.size() == 0) return out;
  auto round_part = [&](auto get, auto set) {
    double lo = get(out.samples[0]);
    double hi = lo;
    for (Eigen::Index i = 0; i < out.samples.size(); ++i) {
      lo = std::min(lo, get(out.samples[i]));
      hi = std::max(hi, get(out.samples[i]));
    }
    if (hi <= lo) return;
    const double step = (hi - lo) / (std::ldexp(1.0, bits) - 1.0);
    for (Eigen::Index i = 0; i < out.samples.size(); ++i) {
      set(out.samples[i], lo + std::round((get(out.samples[i]) - lo) / step) * step);
    }
  };
  round_part([](const std::complex<double>& z) { return z.real(); },
             [](std::complex<double>& z, double v) { z.real(v); });
  round_part([](const std::complex<double>& z) { return z.imag(); },
             [](std::complex<double>& z, double v) { z.imag(v); });
  return out;
}

Image walsh_pattern(std::size_t side, std::uint64_t index) {
  const std::uint64_t row = index / side;
  const std::uint64_t col = index % side;
  const auto s = static_cast<Eigen::Index>(side);
  Image pattern(s, s);
  for (Eigen::Index p = 0; p < s; ++p) {
    const int row_parity = std::popcount(row & static_cast<std::uint64_t>(p)) & 1;
    for (Eigen::Index q = 0; q < s; ++q) {
      const int parity = row_parity ^ (std::popcount(col & static_cast<std::uint64_t>(q)) & 1);
      pattern(p, q) = parity ? -1.0 : 1.0;
    }
  }
  return pattern;
}

Measurement measure_differential_binary(const Image& scene, const RowSelection& selection,
                                        const DifferentialOptions& options) {
  if (selection.basis != BasisKind::WalshHadamard) {
    throw UnsupportedModeError("measure_differential_binary: only Walsh-Hadamard patterns can be binarized");
  }
  if (scene.rows() != scene.cols() || static_cast<std::uint64_t>(scene.size()) != selection.n) {
    throw SizeError("measure_differential_binary: scene does not match n = " + std::to_string(selection.n));
  }
  if ((scene.array() < 0.0).any()) throw ParameterError("measure_differential_binary: scene must be nonnegative");

  const auto side = static_cast<std::size_t>(scene.rows());
  Random rng(options.noise_seed);
  Measurement meas;
  meas.samples.resize(static_cast<Eigen::Index>(selection.m));
  meas.selection = selection;
  meas.noise_seed = options.noise_seed;
  for (std::size_t i = 0; i < selection.indices.size(); ++i) {
    const Image pattern = (walsh_pattern(side, selection.indices[i]).array() + 1.0) * 0.5;  // b in {0, 1}
    double on = (pattern.array() * scene.array()).sum() + options.bias;
    double off = ((1.0 - pattern.array()) * scene.array()).sum() + options.bias;
    if (options.reading_noise_sigma > 0.0) {
      on += options.reading_noise_sigma * rng.normal();
      off += options.reading_noise_sigma * rng.normal();
    }
    meas.samples[static_cast<Eigen::Index>(i)] = on - off;
  }
  return meas;
}

Measurement normalize_differential(const Measurement& meas) {
  Measurement out = meas;
  out.samples /= std::sqrt(static_cast<double>(meas.selection.n));
  return out;
}

}  // namespace cpof
