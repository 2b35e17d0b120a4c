#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace cpof {

template <typename Scalar>
using ComplexPlaneT = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RealPlaneT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using ComplexVectorT = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

// Square, row-major, power-of-two side. Flattened index = row * side + col.
using Plane = ComplexPlaneT<double>;
using Image = RealPlaneT<double>;
using CVector = ComplexVectorT<double>;

// Frequency-domain samples of a circulant filter, same shape as the images it acts on.
using TransferFunction = Plane;
// Recovered (or directly computed) correlation signal.
using CorrelationPlane = Plane;

enum class BasisKind : std::uint8_t { WalshHadamard = 0, Noiselet = 1, Fourier = 2 };
enum class Direction { Forward, Adjoint };

std::string to_string(BasisKind basis);
BasisKind parse_basis(const std::string& text);

constexpr bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline Eigen::Map<CVector> flat(Plane& p) { return {p.data(), p.size()}; }
inline Eigen::Map<const CVector> flat(const Plane& p) { return {p.data(), p.size()}; }

inline Plane to_plane(const CVector& v, std::size_t side) {
  return Eigen::Map<const Plane>(v.data(), static_cast<Eigen::Index>(side), static_cast<Eigen::Index>(side));
}

inline Plane to_complex(const Image& img) { return img.cast<std::complex<double>>(); }

// Error hierarchy. Everything derives from cpof::Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class UnsupportedModeError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class CongestionError : public Error {
 public:
  using Error::Error;
};

}  // namespace cpof
