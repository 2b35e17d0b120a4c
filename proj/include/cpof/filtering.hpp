#pragma once

#include <cstddef>

#include "cpof/types.hpp"

namespace cpof {

/// Relative threshold below which a spectral bin counts as zero when forming
/// phase-only transfer functions (relative to the largest spectral modulus).
inline constexpr double kDefaultZeroTol = 1e-12;

/// Block-circulant operator T = F^H diag(h) F on side x side planes, with F the
/// unitary 2D DFT. Immutable after construction.
class CirculantOperator {
 public:
  explicit CirculantOperator(TransferFunction transfer);

  static CirculantOperator identity(std::size_t side);

  const TransferFunction& transfer() const { return transfer_; }
  std::size_t side() const { return static_cast<std::size_t>(transfer_.rows()); }
  std::size_t size() const { return side() * side(); }

  /// True when every transfer value has modulus 1 within `tol`, i.e. T is unitary.
  bool is_unit_modulus(double tol = 1e-12) const;

  /// Transfer values with rows and columns in bit-reversed order, matching the
  /// spectrum layout of the fast convolution path.
  const TransferFunction& transfer_bit_reversed() const { return bit_reversed_; }

 private:
  TransferFunction transfer_;
  TransferFunction bit_reversed_;
};

/// forward: F^H (h .* F v); adjoint: F^H (conj(h) .* F v).
Plane apply_circulant(const CirculantOperator& op, const Plane& v, Direction direction);

/// Zero-pads a small target into the top-left corner of a side x side plane.
Plane embed_reference(const Image& target, std::size_t side);

/// Matched phase-only filter: h_k = conj(r_k) / |r_k|. Bins with
/// |r_k| <= zero_tol * max|r| get h_k = 1, so the operator is always unitary.
CirculantOperator make_pof(const Plane& reference, double zero_tol = kDefaultZeroTol);

/// Correlation plane s = T x: circular correlation of the scene with the
/// filter whose (unnormalized) DFT is the transfer function. Energy preserving,
/// and T^H s gives the scene back.
CorrelationPlane pof_correlate(const CirculantOperator& op, const Plane& scene);

/// Spectral whitening x' with x'_k = x_k / |x_k| (zero bins set to 1).
Plane whiten(const Plane& scene, double zero_tol = kDefaultZeroTol);

/// Fresnel propagation transfer function over `distance`, sampled on the DFT
/// frequency grid of a side x side plane with the given pixel pitch. DC sits at
/// index 0 and negative frequencies are wrapped to the upper half.
TransferFunction fresnel_transfer(std::size_t side, double wavelength, double distance, double pixel_pitch);

}  // namespace cpof
