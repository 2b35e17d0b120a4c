#pragma once

// Fast unitary transforms: Walsh-Hadamard (natural order), noiselet and DFT,
// in 1D and in the separable 2D (Kronecker) form over row-major planes.

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "cpof/types.hpp"

namespace cpof {

namespace detail {

inline void require_power_of_two(std::size_t n, const char* what) {
  if (!is_power_of_two(n)) {
    throw SizeError(std::string(what) + ": length " + std::to_string(n) + " is not a power of two");
  }
}

// Radix-2 butterfly over `n` blocks of `block` contiguous values. With block = 1
// this is the 1D transform of a contiguous vector; with block = side it applies
// the transform down the columns of a row-major plane, one row vector at a time.
//
// Every level applies the same 2x2 kernel [[a, b], [c, d]] to pairs of blocks
// (j, j + h), which realizes K (x) K (x) ... (x) K, i.e. the recursions
//   H_2m = K_H (x) H_m   and   N_2m = K_N (x) N_m.
template <typename Scalar>
void butterfly_blocks(std::complex<Scalar>* data, std::size_t n, std::size_t block, std::complex<Scalar> a,
                      std::complex<Scalar> b, std::complex<Scalar> c, std::complex<Scalar> d) {
  for (std::size_t h = 1; h < n; h *= 2) {
    for (std::size_t i = 0; i < n; i += 2 * h) {
      for (std::size_t j = i; j < i + h; ++j) {
        std::complex<Scalar>* top = data + j * block;
        std::complex<Scalar>* bot = data + (j + h) * block;
        for (std::size_t k = 0; k < block; ++k) {
          const std::complex<Scalar> u = top[k];
          const std::complex<Scalar> v = bot[k];
          top[k] = a * u + b * v;
          bot[k] = c * u + d * v;
        }
      }
    }
  }
}

// Unnormalized +/-1 Hadamard butterfly; caller applies the n^{-1/2} scale once.
template <typename Scalar>
void hadamard_blocks(std::complex<Scalar>* data, std::size_t n, std::size_t block) {
  for (std::size_t h = 1; h < n; h *= 2) {
    for (std::size_t i = 0; i < n; i += 2 * h) {
      for (std::size_t j = i; j < i + h; ++j) {
        std::complex<Scalar>* top = data + j * block;
        std::complex<Scalar>* bot = data + (j + h) * block;
        for (std::size_t k = 0; k < block; ++k) {
          const std::complex<Scalar> u = top[k];
          const std::complex<Scalar> v = bot[k];
          top[k] = u + v;
          bot[k] = u - v;
        }
      }
    }
  }
}

template <typename Scalar>
void scale(std::complex<Scalar>* data, std::size_t count, Scalar factor) {
  for (std::size_t k = 0; k < count; ++k) data[k] *= factor;
}

// Noiselet kernel (1/2)[[1-i, 1+i], [1+i, 1-i]]; the adjoint kernel is its conjugate
// (the kernel is symmetric).
template <typename Scalar>
void noiselet_blocks(std::complex<Scalar>* data, std::size_t n, std::size_t block, Direction dir) {
  const Scalar half = Scalar(0.5);
  std::complex<Scalar> p(half, -half);  // (1 - i) / 2
  std::complex<Scalar> q(half, half);   // (1 + i) / 2
  if (dir == Direction::Adjoint) {
    p = std::conj(p);
    q = std::conj(q);
  }
  butterfly_blocks<Scalar>(data, n, block, p, q, q, p);
}

template <typename Scalar>
inline std::complex<Scalar> cmul(std::complex<Scalar> a, std::complex<Scalar> b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

// Entry h + k holds exp(-i pi k / h) for every power of two h < n, k < h.
template <typename Scalar>
const std::vector<std::complex<Scalar>>& fft_twiddles(std::size_t n) {
  thread_local std::map<std::size_t, std::vector<std::complex<Scalar>>> cache;
  auto& table = cache[n];
  if (table.empty()) {
    table.resize(std::max<std::size_t>(n, 1));
    for (std::size_t h = 1; h < n; h *= 2) {
      for (std::size_t k = 0; k < h; ++k) {
        table[h + k] = std::polar(Scalar(1), -std::numbers::pi_v<Scalar> * static_cast<Scalar>(k) / static_cast<Scalar>(h));
      }
    }
  }
  return table;
}

// Unnormalized radix-2 decimation-in-frequency DFT over `n` blocks (natural
// order in, bit-reversed order out).
template <typename Scalar>
void fft_dif_blocks(std::complex<Scalar>* data, std::size_t n, std::size_t block) {
  const auto& tw = fft_twiddles<Scalar>(n);
  for (std::size_t h = n / 2; h >= 1; h /= 2) {
    for (std::size_t i = 0; i < n; i += 2 * h) {
      for (std::size_t j = 0; j < h; ++j) {
        const std::complex<Scalar> w = tw[h + j];
        std::complex<Scalar>* top = data + (i + j) * block;
        std::complex<Scalar>* bot = data + (i + j + h) * block;
        for (std::size_t k = 0; k < block; ++k) {
          const std::complex<Scalar> u = top[k];
          const std::complex<Scalar> v = bot[k];
          top[k] = u + v;
          bot[k] = cmul(u - v, w);
        }
      }
    }
  }
}

// Inverse of fft_dif_blocks up to a factor n: bit-reversed spectrum in,
// natural order out, conjugate twiddles.
template <typename Scalar>
void fft_dit_inverse_blocks(std::complex<Scalar>* data, std::size_t n, std::size_t block) {
  const auto& tw = fft_twiddles<Scalar>(n);
  for (std::size_t h = 1; h < n; h *= 2) {
    for (std::size_t i = 0; i < n; i += 2 * h) {
      for (std::size_t j = 0; j < h; ++j) {
        const std::complex<Scalar> w = std::conj(tw[h + j]);
        std::complex<Scalar>* top = data + (i + j) * block;
        std::complex<Scalar>* bot = data + (i + j + h) * block;
        for (std::size_t k = 0; k < block; ++k) {
          const std::complex<Scalar> u = top[k];
          const std::complex<Scalar> v = cmul(bot[k], w);
          top[k] = u + v;
          bot[k] = u - v;
        }
      }
    }
  }
}

inline std::size_t bit_reverse(std::size_t index, std::size_t n) {
  std::size_t out = 0;
  for (std::size_t bit = 1; bit < n; bit *= 2) {
    out = (out << 1) | (index & 1);
    index >>= 1;
  }
  return out;
}

template <typename Scalar>
Eigen::FFT<Scalar>& thread_fft() {
  thread_local Eigen::FFT<Scalar> fft = [] {
    Eigen::FFT<Scalar> f;
    f.SetFlag(Eigen::FFT<Scalar>::Unscaled);
    return f;
  }();
  return fft;
}

// Unitary DFT of each of `count` contiguous rows of length n.
template <typename Scalar>
void dft_rows(std::complex<Scalar>* data, std::size_t n, std::size_t count, Direction dir) {
  auto& fft = thread_fft<Scalar>();
  std::vector<std::complex<Scalar>> buffer(n);
  const Scalar norm = Scalar(1) / std::sqrt(static_cast<Scalar>(n));
  for (std::size_t r = 0; r < count; ++r) {
    std::complex<Scalar>* row = data + r * n;
    if (dir == Direction::Forward) {
      fft.fwd(buffer.data(), row, static_cast<Eigen::Index>(n));
    } else {
      fft.inv(buffer.data(), row, static_cast<Eigen::Index>(n));
    }
    for (std::size_t k = 0; k < n; ++k) row[k] = buffer[k] * norm;
  }
}

template <typename Scalar>
void transform_rows(std::complex<Scalar>* data, std::size_t n, std::size_t count, BasisKind basis, Direction dir) {
  switch (basis) {
    case BasisKind::WalshHadamard:
      for (std::size_t r = 0; r < count; ++r) hadamard_blocks<Scalar>(data + r * n, n, 1);
      scale<Scalar>(data, n * count, Scalar(1) / std::sqrt(static_cast<Scalar>(n)));
      break;
    case BasisKind::Noiselet:
      for (std::size_t r = 0; r < count; ++r) noiselet_blocks<Scalar>(data + r * n, n, 1, dir);
      break;
    case BasisKind::Fourier:
      dft_rows<Scalar>(data, n, count, dir);
      break;
  }
}

}  // namespace detail

/// In-place 1D transform of a contiguous vector. WH and noiselet require a
/// power-of-two length; the DFT accepts any length.
template <typename Scalar>
void transform_1d_inplace(std::complex<Scalar>* data, std::size_t n, BasisKind basis, Direction dir) {
  if (basis != BasisKind::Fourier) detail::require_power_of_two(n, "transform_1d");
  if (n == 0) throw SizeError("transform_1d: empty input");
  detail::transform_rows<Scalar>(data, n, 1, basis, dir);
}

/// In-place 2D separable transform of a row-major side x side plane: the 1D
/// transform along every row, then along every column.
template <typename Scalar>
void transform_2d_inplace(std::complex<Scalar>* data, std::size_t side, BasisKind basis, Direction dir) {
  detail::require_power_of_two(side, "transform_2d");
  detail::transform_rows<Scalar>(data, side, side, basis, dir);
  switch (basis) {
    case BasisKind::WalshHadamard:
      detail::hadamard_blocks<Scalar>(data, side, side);
      detail::scale<Scalar>(data, side * side, Scalar(1) / std::sqrt(static_cast<Scalar>(side)));
      break;
    case BasisKind::Noiselet:
      detail::noiselet_blocks<Scalar>(data, side, side, dir);
      break;
    case BasisKind::Fourier: {
      Eigen::Map<ComplexPlaneT<Scalar>> plane(data, static_cast<Eigen::Index>(side), static_cast<Eigen::Index>(side));
      plane.transposeInPlace();
      detail::dft_rows<Scalar>(data, side, side, dir);
      plane.transposeInPlace();
      break;
    }
  }
}

template <typename Derived>
ComplexVectorT<typename Derived::RealScalar> transform_1d(const Eigen::MatrixBase<Derived>& v, BasisKind basis,
                                                          Direction dir) {
  using Real = typename Derived::RealScalar;
  ComplexVectorT<Real> out = v.template cast<std::complex<Real>>();
  transform_1d_inplace<Real>(out.data(), static_cast<std::size_t>(out.size()), basis, dir);
  return out;
}

template <typename Derived>
auto wht_1d(const Eigen::MatrixBase<Derived>& v) {
  return transform_1d(v, BasisKind::WalshHadamard, Direction::Forward);
}
template <typename Derived>
auto wht_adjoint_1d(const Eigen::MatrixBase<Derived>& v) {
  return transform_1d(v, BasisKind::WalshHadamard, Direction::Adjoint);
}
template <typename Derived>
auto noiselet_1d(const Eigen::MatrixBase<Derived>& v) {
  return transform_1d(v, BasisKind::Noiselet, Direction::Forward);
}
template <typename Derived>
auto noiselet_adjoint_1d(const Eigen::MatrixBase<Derived>& v) {
  return transform_1d(v, BasisKind::Noiselet, Direction::Adjoint);
}
template <typename Derived>
auto dft_1d(const Eigen::MatrixBase<Derived>& v) {
  return transform_1d(v, BasisKind::Fourier, Direction::Forward);
}
template <typename Derived>
auto dft_adjoint_1d(const Eigen::MatrixBase<Derived>& v) {
  return transform_1d(v, BasisKind::Fourier, Direction::Adjoint);
}

/// 2D transform of a square power-of-two plane (real or complex input).
template <typename Derived>
ComplexPlaneT<typename Derived::RealScalar> transform_2d(const Eigen::MatrixBase<Derived>& img, BasisKind basis,
                                                         Direction dir) {
  using Real = typename Derived::RealScalar;
  if (img.rows() != img.cols()) {
    throw SizeError("transform_2d: plane is " + std::to_string(img.rows()) + "x" + std::to_string(img.cols()) +
                    ", expected square");
  }
  ComplexPlaneT<Real> out = img.template cast<std::complex<Real>>();
  transform_2d_inplace<Real>(out.data(), static_cast<std::size_t>(out.rows()), basis, dir);
  return out;
}

}  // namespace cpof
