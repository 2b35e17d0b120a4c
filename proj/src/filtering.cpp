#include "cpof/filtering.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cpof/xforms.hpp"

namespace cpof {

std::string to_string(BasisKind basis) {
  switch (basis) {
    case BasisKind::WalshHadamard: return "wh";
    case BasisKind::Noiselet: return "noiselet";
    case BasisKind::Fourier: return "dft";
  }
  return "unknown";
}

BasisKind parse_basis(const std::string& text) {
  if (text == "wh" || text == "walsh-hadamard" || text == "hadamard") return BasisKind::WalshHadamard;
  if (text == "noiselet") return BasisKind::Noiselet;
  if (text == "dft" || text == "fourier") return BasisKind::Fourier;
  throw ParameterError("unknown basis '" + text + "' (expected wh, noiselet or dft)");
}

namespace {

void require_square_pow2(const Plane& p, const char* what) {
  if (p.rows() != p.cols() || !is_power_of_two(static_cast<std::size_t>(p.rows()))) {
    throw SizeError(std::string(what) + ": expected a square power-of-two plane, got " + std::to_string(p.rows()) +
                    "x" + std::to_string(p.cols()));
  }
}

// Replaces every spectral value by its phase; bins at or below the threshold become 1.
void normalize_phases(Plane& spectrum, double zero_tol, const char* what) {
  const double peak = spectrum.cwiseAbs().maxCoeff();
  if (!(peak > 0.0)) throw DegenerateInputError(std::string(what) + ": input is identically zero");
  const double threshold = zero_tol * peak;
  for (Eigen::Index k = 0; k < spectrum.size(); ++k) {
    std::complex<double>& z = spectrum.data()[k];
    const double mag = std::abs(z);
    z = mag > threshold ? z / mag : std::complex<double>(1.0, 0.0);
  }
}

}  // namespace

CirculantOperator::CirculantOperator(TransferFunction transfer) : transfer_(std::move(transfer)) {
  require_square_pow2(transfer_, "CirculantOperator");
  const std::size_t side = this->side();
  bit_reversed_.resize(transfer_.rows(), transfer_.cols());
  for (std::size_t r = 0; r < side; ++r) {
    const auto rr = static_cast<Eigen::Index>(detail::bit_reverse(r, side));
    for (std::size_t c = 0; c < side; ++c) {
      const auto cc = static_cast<Eigen::Index>(detail::bit_reverse(c, side));
      bit_reversed_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = transfer_(rr, cc);
    }
  }
}

CirculantOperator CirculantOperator::identity(std::size_t side) {
  const auto s = static_cast<Eigen::Index>(side);
  return CirculantOperator(TransferFunction::Ones(s, s));
}

bool CirculantOperator::is_unit_modulus(double tol) const {
  return ((transfer_.cwiseAbs().array() - 1.0).abs() <= tol).all();
}

Plane apply_circulant(const CirculantOperator& op, const Plane& v, Direction direction) {
  if (v.rows() != op.transfer().rows() || v.cols() != op.transfer().cols()) {
    throw SizeError("apply_circulant: plane " + std::to_string(v.rows()) + "x" + std::to_string(v.cols()) +
                    " does not match operator side " + std::to_string(op.side()));
  }
  // Radix-2 DIF leaves the spectrum bit-reversed in both axes and the DIT
  // inverse reads it back in that order, so no permutation is needed.
  const std::size_t side = op.side();
  Plane out = v;
  std::complex<double>* data = out.data();
  for (std::size_t r = 0; r < side; ++r) detail::fft_dif_blocks<double>(data + r * side, side, 1);
  detail::fft_dif_blocks<double>(data, side, side);
  if (direction == Direction::Forward) {
    out.array() *= op.transfer_bit_reversed().array();
  } else {
    out.array() *= op.transfer_bit_reversed().array().conjugate();
  }
  detail::fft_dit_inverse_blocks<double>(data, side, side);
  for (std::size_t r = 0; r < side; ++r) detail::fft_dit_inverse_blocks<double>(data + r * side, side, 1);
  out *= 1.0 / static_cast<double>(side * side);
  return out;
}

Plane embed_reference(const Image& target, std::size_t side) {
  const auto s = static_cast<Eigen::Index>(side);
  if (target.rows() > s || target.cols() > s) {
    throw SizeError("embed_reference: target " + std::to_string(target.rows()) + "x" +
                    std::to_string(target.cols()) + " does not fit a " + std::to_string(side) + " scene");
  }
  Plane out = Plane::Zero(s, s);
  out.topLeftCorner(target.rows(), target.cols()) = target.cast<std::complex<double>>();
  return out;
}

CirculantOperator make_pof(const Plane& reference, double zero_tol) {
  require_square_pow2(reference, "make_pof");
  Plane spectrum = transform_2d(reference, BasisKind::Fourier, Direction::Forward);
  normalize_phases(spectrum, zero_tol, "make_pof");
  return CirculantOperator(spectrum.conjugate());
}

CorrelationPlane pof_correlate(const CirculantOperator& op, const Plane& scene) {
  return apply_circulant(op, scene, Direction::Forward);
}

Plane whiten(const Plane& scene, double zero_tol) {
  require_square_pow2(scene, "whiten");
  Plane spectrum = transform_2d(scene, BasisKind::Fourier, Direction::Forward);
  normalize_phases(spectrum, zero_tol, "whiten");
  transform_2d_inplace<double>(spectrum.data(), static_cast<std::size_t>(scene.rows()), BasisKind::Fourier,
                               Direction::Adjoint);
  return spectrum;
}

TransferFunction fresnel_transfer(std::size_t side, double wavelength, double distance, double pixel_pitch) {
  if (!(wavelength > 0.0) || !(pixel_pitch > 0.0) || !(distance >= 0.0) || !std::isfinite(distance)) {
    throw ParameterError("fresnel_transfer: wavelength and pixel pitch must be positive, distance nonnegative");
  }
  if (!is_power_of_two(side)) throw SizeError("fresnel_transfer: side must be a power of two");
  const auto s = static_cast<Eigen::Index>(side);
  const double df = 1.0 / (static_cast<double>(side) * pixel_pitch);
  auto freq = [&](Eigen::Index k) {
    const auto wrapped = k < s / 2 ? k : k - s;
    return static_cast<double>(wrapped) * df;
  };
  const std::complex<double> carrier = std::polar(1.0, -2.0 * std::numbers::pi * distance / wavelength);
  TransferFunction h(s, s);
  for (Eigen::Index r = 0; r < s; ++r) {
    const double fy = freq(r);
    for (Eigen::Index c = 0; c < s; ++c) {
      const double fx = freq(c);
      h(r, c) = carrier * std::polar(1.0, std::numbers::pi * wavelength * distance * (fx * fx + fy * fy));
    }
  }
  return h;
}

}  // namespace cpof
