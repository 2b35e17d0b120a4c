#include "cpof/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace cpof {

namespace {

// ---- little-endian primitives ----

template <typename UInt>
void put_uint(std::ostream& os, UInt value) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  os.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt get_uint(std::istream& is, const char* what) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  is.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!is) throw FormatError(std::string(what) + ": truncated file");
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) value |= static_cast<UInt>(bytes[i]) << (8 * i);
  return value;
}

void put_f64(std::ostream& os, double v) { put_uint<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& is, const char* what) { return std::bit_cast<double>(get_uint<std::uint64_t>(is, what)); }

void put_magic(std::ostream& os, const char* magic) {
  os.write(magic, 4);
  put_uint<std::uint16_t>(os, kFormatVersion);
}

void expect_magic(std::istream& is, const char* magic, const char* what) {
  char got[4] = {};
  is.read(got, 4);
  if (!is || std::memcmp(got, magic, 4) != 0) throw FormatError(std::string(what) + ": bad magic");
  const auto version = get_uint<std::uint16_t>(is, what);
  if (version != kFormatVersion) {
    throw FormatError(std::string(what) + ": unsupported version " + std::to_string(version));
  }
}

void put_complex(std::ostream& os, const std::complex<double>* data, std::size_t count) {
  for (std::size_t k = 0; k < count; ++k) {
    put_f64(os, data[k].real());
    put_f64(os, data[k].imag());
  }
}

void get_complex(std::istream& is, std::complex<double>* data, std::size_t count, const char* what) {
  for (std::size_t k = 0; k < count; ++k) {
    const double re = get_f64(is, what);
    const double im = get_f64(is, what);
    data[k] = {re, im};
  }
}

std::size_t checked_side(std::uint64_t side, const char* what) {
  if (!is_power_of_two(side) || side > (1u << 15)) {
    throw FormatError(std::string(what) + ": side " + std::to_string(side) + " is not a supported power of two");
  }
  return static_cast<std::size_t>(side);
}

template <typename Fn>
void with_output(const std::filesystem::path& path, Fn&& fn) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  fn(os);
  if (!os) throw FormatError("write failed for " + path.string());
}

template <typename Fn>
auto with_input(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return fn(is);
}

// ---- PGM header tokens (whitespace and '#' comments) ----

struct PgmHeader {
  std::string magic;
  long width = 0, height = 0, maxval = 0;
  bool scaled = false;
  double scale = 1.0, offset = 0.0;
};

std::string next_token(std::istream& is, PgmHeader& header) {
  std::string token;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      std::string comment;
      std::getline(is, comment);
      double scale = 0.0, offset = 0.0;
      if (std::sscanf(comment.c_str(), " cpof-scale %lf %lf", &scale, &offset) == 2 && scale != 0.0) {
        header.scaled = true;
        header.scale = scale;
        header.offset = offset;
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  return token;
}

long parse_positive(const std::string& token, const char* field) {
  char* end = nullptr;
  const long v = std::strtol(token.c_str(), &end, 10);
  if (token.empty() || *end != '\0' || v <= 0) throw FormatError(std::string("PGM: malformed ") + field);
  return v;
}

}  // namespace

Image read_pgm(std::istream& is) {
  PgmHeader h;
  h.magic = next_token(is, h);
  if (h.magic != "P5") throw FormatError("PGM: expected binary P5 magic, got '" + h.magic + "'");
  h.width = parse_positive(next_token(is, h), "width");
  h.height = parse_positive(next_token(is, h), "height");
  h.maxval = parse_positive(next_token(is, h), "maxval");
  if (h.maxval > 255) throw FormatError("PGM: only 8-bit images (maxval <= 255) are supported");
  // next_token consumed exactly one whitespace byte after maxval.
  Image img(h.height, h.width);
  std::string raw(static_cast<std::size_t>(h.width * h.height), '\0');
  is.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!is) throw FormatError("PGM: truncated pixel data");
  for (Eigen::Index k = 0; k < img.size(); ++k) {
    double v = static_cast<unsigned char>(raw[static_cast<std::size_t>(k)]);
    if (v > h.maxval) throw FormatError("PGM: pixel value above maxval");
    if (h.scaled) v = v / h.scale + h.offset;
    img.data()[k] = v;
  }
  return img;
}

Image load_pgm(const std::filesystem::path& path) {
  return with_input(path, [](std::istream& is) { return read_pgm(is); });
}

Image load_scene_pgm(const std::filesystem::path& path) {
  Image img = load_pgm(path);
  if (img.rows() != img.cols() || !is_power_of_two(static_cast<std::size_t>(img.rows()))) {
    throw FormatError("PGM " + path.string() + ": scene must be square with a power-of-two side, got " +
                      std::to_string(img.cols()) + "x" + std::to_string(img.rows()));
  }
  return img;
}

namespace {

void write_pgm_impl(std::ostream& os, const Image& img, const PgmScaling* scaling) {
  os << "P5\n";
  if (scaling) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "# cpof-scale %.17g %.17g\n", scaling->scale, scaling->offset);
    os << buf;
  }
  os << img.cols() << ' ' << img.rows() << "\n255\n";
  std::string raw(static_cast<std::size_t>(img.size()), '\0');
  for (Eigen::Index k = 0; k < img.size(); ++k) {
    double v = img.data()[k];
    if (scaling) v = (v - scaling->offset) * scaling->scale;
    raw[static_cast<std::size_t>(k)] = static_cast<char>(static_cast<unsigned char>(std::clamp(std::round(v), 0.0, 255.0)));
  }
  os.write(raw.data(), static_cast<std::streamsize>(raw.size()));
}

}  // namespace

void write_pgm(std::ostream& os, const Image& img) { write_pgm_impl(os, img, nullptr); }

void store_pgm(const std::filesystem::path& path, const Image& img) {
  with_output(path, [&](std::ostream& os) { write_pgm(os, img); });
}

PgmScaling store_scaled_pgm(const std::filesystem::path& path, const Image& img) {
  PgmScaling s;
  const double lo = img.minCoeff();
  const double hi = img.maxCoeff();
  s.offset = lo;
  s.scale = hi > lo ? 255.0 / (hi - lo) : 1.0;
  with_output(path, [&](std::ostream& os) { write_pgm_impl(os, img, &s); });
  return s;
}

void write_plane(std::ostream& os, const Plane& plane) {
  if (plane.rows() != plane.cols()) throw SizeError("write_plane: plane must be square");
  put_magic(os, "PCSP");
  put_uint<std::uint64_t>(os, static_cast<std::uint64_t>(plane.rows()));
  put_complex(os, plane.data(), static_cast<std::size_t>(plane.size()));
}

Plane read_plane(std::istream& is) {
  expect_magic(is, "PCSP", "PCSP");
  const std::size_t side = checked_side(get_uint<std::uint64_t>(is, "PCSP"), "PCSP");
  Plane plane(static_cast<Eigen::Index>(side), static_cast<Eigen::Index>(side));
  get_complex(is, plane.data(), side * side, "PCSP");
  return plane;
}

void store_plane(const std::filesystem::path& path, const Plane& plane) {
  with_output(path, [&](std::ostream& os) { write_plane(os, plane); });
}

Plane load_plane(const std::filesystem::path& path) {
  return with_input(path, [](std::istream& is) { return read_plane(is); });
}

void write_measurement(std::ostream& os, const Measurement& meas) {
  put_magic(os, "PCSM");
  put_uint<std::uint8_t>(os, static_cast<std::uint8_t>(meas.selection.basis));
  put_uint<std::uint8_t>(os, meas.whitened ? 1 : 0);
  put_uint<std::uint64_t>(os, meas.selection.n);
  put_uint<std::uint64_t>(os, meas.selection.m);
  put_uint<std::uint64_t>(os, meas.selection.seed);
  put_uint<std::uint64_t>(os, meas.noise_seed);
  put_f64(os, meas.snr_db);
  put_complex(os, meas.samples.data(), static_cast<std::size_t>(meas.samples.size()));
}

Measurement read_measurement(std::istream& is) {
  expect_magic(is, "PCSM", "PCSM");
  const auto basis_tag = get_uint<std::uint8_t>(is, "PCSM");
  if (basis_tag > 2) throw FormatError("PCSM: unknown basis tag " + std::to_string(basis_tag));
  const auto whitened = get_uint<std::uint8_t>(is, "PCSM");
  const auto n = get_uint<std::uint64_t>(is, "PCSM");
  const auto m = get_uint<std::uint64_t>(is, "PCSM");
  const auto seed = get_uint<std::uint64_t>(is, "PCSM");
  Measurement meas;
  meas.noise_seed = get_uint<std::uint64_t>(is, "PCSM");
  meas.snr_db = get_f64(is, "PCSM");
  if (m == 0 || m > n || n > (std::uint64_t{1} << 30)) throw FormatError("PCSM: inconsistent n/m header");
  meas.whitened = whitened != 0;
  try {
    meas.selection = select_rows(static_cast<BasisKind>(basis_tag), n, m, seed);
  } catch (const Error& e) {
    throw FormatError(std::string("PCSM: ") + e.what());
  }
  meas.samples.resize(static_cast<Eigen::Index>(m));
  get_complex(is, meas.samples.data(), static_cast<std::size_t>(m), "PCSM");
  if (std::isfinite(meas.snr_db)) {
    // The stored samples carry signal plus noise: P_noisy = P (1 + r) with sigma^2 = P r.
    const double r = std::pow(10.0, -meas.snr_db / 10.0);
    meas.noise_sigma = std::sqrt(ac_power(meas.samples) * r / (1.0 + r));
  }
  return meas;
}

void store_measurement(const std::filesystem::path& path, const Measurement& meas) {
  with_output(path, [&](std::ostream& os) { write_measurement(os, meas); });
}

Measurement load_measurement(const std::filesystem::path& path) {
  return with_input(path, [](std::istream& is) { return read_measurement(is); });
}

void write_result(std::ostream& os, const SolverResult& result) {
  put_magic(os, "PCSR");
  put_uint<std::uint64_t>(os, static_cast<std::uint64_t>(result.s_hat.rows()));
  put_f64(os, result.residual_norm);
  put_f64(os, result.tau_used);
  put_uint<std::uint64_t>(os, static_cast<std::uint64_t>(result.iterations));
  put_uint<std::uint64_t>(os, static_cast<std::uint64_t>(result.newton_steps));
  put_uint<std::uint8_t>(os, result.converged ? 1 : 0);
  put_complex(os, result.s_hat.data(), static_cast<std::size_t>(result.s_hat.size()));
}

SolverResult read_result(std::istream& is) {
  expect_magic(is, "PCSR", "PCSR");
  const std::size_t side = checked_side(get_uint<std::uint64_t>(is, "PCSR"), "PCSR");
  SolverResult r;
  r.residual_norm = get_f64(is, "PCSR");
  r.tau_used = get_f64(is, "PCSR");
  r.iterations = static_cast<int>(get_uint<std::uint64_t>(is, "PCSR"));
  r.newton_steps = static_cast<int>(get_uint<std::uint64_t>(is, "PCSR"));
  r.converged = get_uint<std::uint8_t>(is, "PCSR") != 0;
  r.s_hat.resize(static_cast<Eigen::Index>(side), static_cast<Eigen::Index>(side));
  get_complex(is, r.s_hat.data(), side * side, "PCSR");
  return r;
}

void store_result(const std::filesystem::path& path, const SolverResult& result) {
  with_output(path, [&](std::ostream& os) { write_result(os, result); });
}

SolverResult load_result(const std::filesystem::path& path) {
  return with_input(path, [](std::istream& is) { return read_result(is); });
}

}  // namespace cpof
