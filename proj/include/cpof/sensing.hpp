#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "cpof/filtering.hpp"
#include "cpof/types.hpp"

namespace cpof {

/// A uniformly random subset of m rows of an n-row unitary basis. Rows index
/// the flattened (row-major) 2D coefficient array in natural order.
struct RowSelection {
  BasisKind basis = BasisKind::WalshHadamard;
  std::vector<std::uint64_t> indices;  // sorted ascending, distinct
  std::uint64_t seed = 0;
  std::uint64_t n = 0;
  std::uint64_t m = 0;

  /// Scene pixels per measurement, n / m.
  double compression_ratio() const { return static_cast<double>(n) / static_cast<double>(m); }
};

/// Seeded partial Fisher-Yates over [0, n): for i in [0, m) swap slot i with
/// slot i + below(n - i); the first m slots are then sorted.
RowSelection select_rows(BasisKind basis, std::uint64_t n, std::uint64_t m, std::uint64_t seed);

struct Measurement {
  CVector samples;
  RowSelection selection;
  bool whitened = false;
  double snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t noise_seed = 0;
  // Per-sample standard deviation of the injected noise (0 when noiseless).
  double noise_sigma = 0.0;
};

/// y = M x (or M x' with x' the whitened scene) at O(n log n) cost.
Measurement measure(const Plane& scene, const RowSelection& selection, bool whitened = false);

/// A = M T^H where T is the matched POF (so that the scene is x = T^H s for the
/// correlation plane s = T x). With no POF, A = M.
class SensingOperator {
 public:
  SensingOperator(RowSelection selection, std::optional<CirculantOperator> pof);

  const RowSelection& selection() const { return selection_; }
  const std::optional<CirculantOperator>& pof() const { return pof_; }
  std::size_t side() const { return side_; }
  Eigen::Index rows() const { return static_cast<Eigen::Index>(selection_.m); }
  Eigen::Index cols() const { return static_cast<Eigen::Index>(selection_.n); }

  CVector apply(const CVector& s) const;
  CVector adjoint(const CVector& y) const;

 private:
  RowSelection selection_;
  std::optional<CirculantOperator> pof_;
  std::size_t side_ = 0;
};

CVector apply_A(const SensingOperator& op, const CorrelationPlane& s);
CorrelationPlane apply_A_adjoint(const SensingOperator& op, const CVector& y);

/// Adds seeded white Gaussian noise at the given SNR, with signal power taken as
/// the mean squared modulus of the samples after removing their mean. Real
/// (Walsh-Hadamard) measurements receive real noise of variance sigma^2; complex
/// ones receive sigma^2 / 2 per component. snr_db = +inf leaves samples unchanged.
Measurement add_noise(const Measurement& meas, double snr_db, std::uint64_t noise_seed);

/// Mean squared modulus of `samples` after removing their mean.
double ac_power(const CVector& samples);

/// Uniform rounding of each sample component to `bits` bits over the sample range.
Measurement quantize(const Measurement& meas, int bits);

struct DifferentialOptions {
  double bias = 0.0;                 // additive detector offset on every reading
  double reading_noise_sigma = 0.0;  // Gaussian noise added to each reading
  std::uint64_t noise_seed = 0;
};

/// Simulated single-pixel measurement with binary {0,1} Walsh-Hadamard patterns
/// and their complements. Sample i is the reading under b_i minus the reading
/// under 1 - b_i, which equals sqrt(n) * <w_i, x> whatever the bias.
Measurement measure_differential_binary(const Image& scene, const RowSelection& selection,
                                        const DifferentialOptions& options = {});

/// Rescales differential readings by 1/sqrt(n) so they match measure().
Measurement normalize_differential(const Measurement& meas);

/// Row `index` of the 2D Walsh-Hadamard basis as a +/-1 sign pattern (unnormalized).
Image walsh_pattern(std::size_t side, std::uint64_t index);

}  // namespace cpof
