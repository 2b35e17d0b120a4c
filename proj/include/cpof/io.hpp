#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "cpof/sensing.hpp"
#include "cpof/solver.hpp"
#include "cpof/types.hpp"

namespace cpof {

// Binary PGM (P5), maxval <= 255.
Image read_pgm(std::istream& is);
Image load_pgm(const std::filesystem::path& path);
/// Like load_pgm, but the image must be square with a power-of-two side.
Image load_scene_pgm(const std::filesystem::path& path);
/// Values are rounded and clamped to [0, 255].
void write_pgm(std::ostream& os, const Image& img);
void store_pgm(const std::filesystem::path& path, const Image& img);

struct PgmScaling {
  double scale = 1.0;   // stored = (value - offset) * scale
  double offset = 0.0;
};
/// Maps [min, max] of a real plane onto [0, 255]; the mapping is recorded as a
/// "# cpof-scale <scale> <offset>" header comment and returned.
PgmScaling store_scaled_pgm(const std::filesystem::path& path, const Image& img);

// Complex plane: "PCSP", u16 version, u64 side, side^2 (re, im) f64 pairs, little-endian.
void write_plane(std::ostream& os, const Plane& plane);
Plane read_plane(std::istream& is);
void store_plane(const std::filesystem::path& path, const Plane& plane);
Plane load_plane(const std::filesystem::path& path);

// Measurement: "PCSM", u16 version, u8 basis, u8 whitened, u64 n, u64 m, u64 seed,
// u64 noise_seed, f64 snr_db, m (re, im) f64 pairs. Row indices are regenerated
// from (basis, n, m, seed). On read, noise_sigma is estimated from snr_db and the
// AC power of the noisy samples.
void write_measurement(std::ostream& os, const Measurement& meas);
Measurement read_measurement(std::istream& is);
void store_measurement(const std::filesystem::path& path, const Measurement& meas);
Measurement load_measurement(const std::filesystem::path& path);

// Solver result: "PCSR", u16 version, u64 side, f64 residual_norm, f64 tau_used,
// u64 iterations, u64 newton_steps, u8 converged, side^2 (re, im) f64 pairs.
void write_result(std::ostream& os, const SolverResult& result);
SolverResult read_result(std::istream& is);
void store_result(const std::filesystem::path& path, const SolverResult& result);
SolverResult load_result(const std::filesystem::path& path);

inline constexpr std::uint16_t kFormatVersion = 1;

}  // namespace cpof
