#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <set>

#include "cpof/filtering.hpp"
#include "cpof/rng.hpp"
#include "cpof/sensing.hpp"
#include "cpof/xforms.hpp"

using namespace cpof;
using cd = std::complex<double>;

namespace {

constexpr BasisKind kAll[] = {BasisKind::WalshHadamard, BasisKind::Noiselet, BasisKind::Fourier};

Plane random_plane(std::size_t side, std::uint64_t seed) {
  Random rng(seed);
  Plane p(side, side);
  for (Eigen::Index k = 0; k < p.size(); ++k) p.data()[k] = cd(rng.normal(), rng.normal());
  return p;
}

CVector random_vector(std::size_t n, std::uint64_t seed) {
  Random rng(seed);
  CVector v(n);
  for (auto& x : v) x = cd(rng.normal(), rng.normal());
  return v;
}

Image random_image(std::size_t side, std::uint64_t seed) {
  Random rng(seed);
  Image img(side, side);
  for (Eigen::Index k = 0; k < img.size(); ++k) img.data()[k] = std::floor(256.0 * rng.uniform());
  return img;
}

// Dense 2D basis matrix obtained by transforming unit vectors one at a time.
Eigen::MatrixXcd dense_basis(BasisKind b, std::size_t side) {
  const std::size_t n = side * side;
  Eigen::MatrixXcd m(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    Plane e = Plane::Zero(side, side);
    e.data()[k] = 1.0;
    const Plane col = transform_2d(e, b, Direction::Forward);
    m.col(k) = Eigen::Map<const CVector>(col.data(), n);
  }
  return m;
}

// Row i of the orthonormal 2D WH basis straight from the sign rule.
double wh_entry(std::size_t side, std::size_t i, std::size_t k) {
  const std::size_t a = i / side, b = i % side, p = k / side, q = k % side;
  const int parity = (__builtin_popcountll(a & p) + __builtin_popcountll(b & q)) & 1;
  return (parity ? -1.0 : 1.0) / double(side);
}

Eigen::MatrixXcd dense_circulant(const CirculantOperator& op) {
  const std::size_t side = op.side(), n = side * side;
  Eigen::MatrixXcd t(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    Plane e = Plane::Zero(side, side);
    e.data()[k] = 1.0;
    const Plane col = apply_circulant(op, e, Direction::Forward);
    t.col(k) = Eigen::Map<const CVector>(col.data(), n);
  }
  return t;
}

double max_abs(const CVector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("select_rows basics") {
  const RowSelection all = select_rows(BasisKind::WalshHadamard, 64, 64, 5);
  for (std::size_t i = 0; i < 64; ++i) CHECK(all.indices[i] == i);

  const RowSelection a = select_rows(BasisKind::Noiselet, 4096, 100, 42);
  const RowSelection b = select_rows(BasisKind::Noiselet, 4096, 100, 42);
  CHECK(a.indices == b.indices);
  CHECK(std::is_sorted(a.indices.begin(), a.indices.end()));
  CHECK(std::adjacent_find(a.indices.begin(), a.indices.end()) == a.indices.end());
  CHECK(a.indices.back() < 4096);
  CHECK(a.compression_ratio() == doctest::Approx(40.96));
  CHECK(select_rows(BasisKind::Noiselet, 4096, 100, 43).indices != a.indices);

  CHECK_THROWS_AS(select_rows(BasisKind::WalshHadamard, 64, 65, 1), ParameterError);
  CHECK_THROWS_AS(select_rows(BasisKind::WalshHadamard, 64, 0, 1), ParameterError);
  CHECK_THROWS_AS(select_rows(BasisKind::WalshHadamard, 48, 4, 1), SizeError);
}

TEST_CASE("select_rows large n: no duplicates, uniform spread") {
  const std::uint64_t n = std::uint64_t{1} << 20;
  std::vector<double> pooled;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RowSelection sel = select_rows(BasisKind::WalshHadamard, n, 1000, seed);
    CHECK(std::set<std::uint64_t>(sel.indices.begin(), sel.indices.end()).size() == 1000);
    for (auto i : sel.indices) pooled.push_back((double(i) + 0.5) / double(n));
  }
  // Kolmogorov-Smirnov distance to U(0, 1); 1.63 / sqrt(N) is the 1% critical value.
  std::sort(pooled.begin(), pooled.end());
  double d = 0.0;
  const double count = double(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    d = std::max({d, std::abs(double(i + 1) / count - pooled[i]), std::abs(pooled[i] - double(i) / count)});
  }
  CHECK(d < 1.63 / std::sqrt(count));
}

TEST_CASE("complete measurement inverts") {
  const Image scene = random_image(16, 1);
  for (BasisKind b : kAll) {
    const Measurement meas = measure(to_complex(scene), select_rows(b, 256, 256, 3));
    const Plane back = transform_2d(to_plane(meas.samples, 16), b, Direction::Adjoint);
    CHECK((back - to_complex(scene)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("single-row samples match dense basis rows") {
  const std::size_t side = 8, n = 64;
  const Image scene = random_image(side, 2);
  const Eigen::Map<const Eigen::VectorXd> x(scene.data(), n);
  for (BasisKind b : kAll) {
    const Eigen::MatrixXcd basis = dense_basis(b, side);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const RowSelection sel = select_rows(b, n, 1, seed);
      const Measurement meas = measure(to_complex(scene), sel);
      const cd expect = basis.row(static_cast<Eigen::Index>(sel.indices[0])) * x.cast<cd>();
      CHECK(std::abs(meas.samples[0] - expect) < 1e-10);
    }
  }
  // WH rows against the sign rule directly.
  const RowSelection sel = select_rows(BasisKind::WalshHadamard, n, 10, 9);
  const Measurement meas = measure(to_complex(scene), sel);
  for (std::size_t r = 0; r < 10; ++r) {
    double expect = 0.0;
    for (std::size_t k = 0; k < n; ++k) expect += wh_entry(side, sel.indices[r], k) * x[k];
    CHECK(std::abs(meas.samples[r] - expect) < 1e-10);
    CHECK(meas.samples[r].imag() == 0.0);
  }
}

TEST_CASE("whitened measurement measures the whitened scene") {
  const Image scene = random_image(16, 4);
  const RowSelection sel = select_rows(BasisKind::Noiselet, 256, 40, 5);
  const Measurement w = measure(to_complex(scene), sel, true);
  const Measurement ref = measure(whiten(to_complex(scene)), sel);
  CHECK(w.whitened);
  CHECK(max_abs(w.samples - ref.samples) < 1e-12);
}

TEST_CASE("identity pof, full selection: A is the basis transform") {
  const std::size_t side = 8;
  for (BasisKind b : kAll) {
    const SensingOperator op(select_rows(b, 64, 64, 1), std::nullopt);
    const Plane s = random_plane(side, 6);
    const Plane t = transform_2d(s, b, Direction::Forward);
    CHECK(max_abs(apply_A(op, s) - Eigen::Map<const CVector>(t.data(), 64)) < 1e-12);
    const CVector y = random_vector(64, 7);
    const Plane inv = transform_2d(to_plane(y, side), b, Direction::Adjoint);
    CHECK((apply_A_adjoint(op, y) - inv).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("A matches the dense composition M B T^H for n = 16") {
  const std::size_t side = 4, n = 16;
  const CirculantOperator pof = make_pof(random_plane(side, 8));
  const Eigen::MatrixXcd t = dense_circulant(pof);
  for (BasisKind b : kAll) {
    const RowSelection sel = select_rows(b, n, 7, 11);
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(7, n);
    for (std::size_t i = 0; i < 7; ++i) m(i, sel.indices[i]) = 1.0;
    const Eigen::MatrixXcd a = m * dense_basis(b, side) * t.adjoint();
    const SensingOperator op(sel, pof);
    const Plane s = random_plane(side, 12);
    CHECK(max_abs(apply_A(op, s) - a * Eigen::Map<const CVector>(s.data(), n)) < 1e-12);
    const CVector y = random_vector(7, 13);
    CHECK(max_abs(flat(apply_A_adjoint(op, y)) - a.adjoint() * y) < 1e-12);
  }
}

TEST_CASE("semi-unitarity, contraction and the inner-product test") {
  const std::size_t side = 32, n = side * side;
  const CirculantOperator pof = make_pof(random_plane(side, 14));
  for (BasisKind b : kAll) {
    for (std::size_t m : {1, 64, 512, 1024}) {
      const SensingOperator op(select_rows(b, n, m, m), pof);
      const CVector y = random_vector(m, 15);
      CHECK(max_abs(op.apply(op.adjoint(y)) - y) < 1e-10);
      const Plane s = random_plane(side, 16);
      const CVector as = apply_A(op, s);
      CHECK(as.norm() <= s.norm() * (1.0 + 1e-12));
      const cd lhs = as.dot(y);  // <A s, y> with conjugation on the left
      const cd rhs = flat(s).dot(op.adjoint(y));
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
    }
  }
}

TEST_CASE("operator shape errors") {
  const SensingOperator op(select_rows(BasisKind::WalshHadamard, 64, 8, 1), std::nullopt);
  CHECK_THROWS_AS(op.apply(CVector::Zero(63)), SizeError);
  CHECK_THROWS_AS(op.adjoint(CVector::Zero(9)), SizeError);
  CHECK_THROWS_AS(apply_A(op, Plane::Zero(4, 4)), SizeError);
  CHECK_THROWS_AS(SensingOperator(select_rows(BasisKind::WalshHadamard, 64, 8, 1), CirculantOperator::identity(4)),
                  SizeError);
  CHECK_THROWS_AS(measure(Plane::Zero(4, 4), select_rows(BasisKind::WalshHadamard, 64, 8, 1)), SizeError);
}

TEST_CASE("add_noise") {
  const Image scene = random_image(128, 17);
  const Measurement clean = measure(to_complex(scene), select_rows(BasisKind::WalshHadamard, 16384, 10000, 18));

  const Measurement same = add_noise(clean, std::numeric_limits<double>::infinity(), 1);
  CHECK(max_abs(same.samples - clean.samples) == 0.0);
  CHECK(same.noise_sigma == 0.0);

  const Measurement noisy = add_noise(clean, 0.0, 19);
  const CVector noise = noisy.samples - clean.samples;
  const double signal_power = (clean.samples.array() - clean.samples.mean()).abs2().mean();
  CHECK(noise.cwiseAbs2().mean() / signal_power == doctest::Approx(1.0).epsilon(0.05));
  CHECK(noise.imag().cwiseAbs().maxCoeff() == 0.0);  // WH samples stay real
  CHECK(noisy.noise_sigma == doctest::Approx(std::sqrt(signal_power)));
  CHECK(max_abs(add_noise(clean, 0.0, 19).samples - noisy.samples) == 0.0);
  CHECK(max_abs(add_noise(clean, 0.0, 20).samples - noisy.samples) > 0.0);

  const Measurement c = measure(to_complex(scene), select_rows(BasisKind::Noiselet, 16384, 10000, 18));
  const Measurement cn = add_noise(c, 10.0, 21);
  const CVector cnoise = cn.samples - c.samples;
  const double sigma2 = cn.noise_sigma * cn.noise_sigma;
  CHECK(cnoise.real().squaredNorm() / 10000 == doctest::Approx(sigma2 / 2).epsilon(0.05));
  CHECK(cnoise.imag().squaredNorm() / 10000 == doctest::Approx(sigma2 / 2).epsilon(0.05));
}

TEST_CASE("ac_power removes the mean") {
  CVector v(4);
  v << 10.0, 12.0, 10.0, 12.0;
  CHECK(ac_power(v) == doctest::Approx(1.0));
  CHECK(ac_power(CVector()) == 0.0);
}

TEST_CASE("quantize") {
  CVector v(3);
  v << 0.0, 0.26, 1.0;
  Measurement m;
  m.samples = v;
  const Measurement q = quantize(m, 2);  // levels 0, 1/3, 2/3, 1
  CHECK(q.samples[1].real() == doctest::Approx(1.0 / 3.0));
  CHECK(q.samples[0].real() == 0.0);
  CHECK(q.samples[2].real() == 1.0);
  CHECK_THROWS_AS(quantize(m, 0), ParameterError);
}

TEST_CASE("walsh_pattern rows are the unnormalized WH basis") {
  const std::size_t side = 8;
  for (std::uint64_t i : {0, 1, 9, 37, 63}) {
    const Image p = walsh_pattern(side, i);
    for (std::size_t k = 0; k < side * side; ++k) CHECK(p.data()[k] == wh_entry(side, i, k) * double(side));
  }
}

TEST_CASE("differential binary measurement") {
  const std::size_t side = 32, n = side * side;
  const Image scene = random_image(side, 22);
  const RowSelection sel = select_rows(BasisKind::WalshHadamard, n, 50, 23);
  const Measurement direct = measure(to_complex(scene), sel);
  const double tol = 1e3 * std::numeric_limits<double>::epsilon() * (scene.sum() + 1e6);
  for (double bias : {0.0, 17.25, -3.0, 1e6}) {
    DifferentialOptions opts;
    opts.bias = bias;
    const Measurement diff = measure_differential_binary(scene, sel, opts);
    CHECK(max_abs(diff.samples - std::sqrt(double(n)) * direct.samples) < tol);
    CHECK(max_abs(normalize_differential(diff).samples - direct.samples) < tol);
  }
  // Integer scene and integer bias: readings are exact, so bias cancels bit for bit.
  DifferentialOptions big;
  big.bias = 1e6;
  CHECK(max_abs(measure_differential_binary(scene, sel, big).samples - measure_differential_binary(scene, sel).samples) ==
        0.0);

  CHECK_THROWS_AS(measure_differential_binary(scene, select_rows(BasisKind::Noiselet, n, 5, 1)), UnsupportedModeError);
  CHECK_THROWS_AS(measure_differential_binary(-scene, sel), ParameterError);
}

TEST_CASE("differential noise variance is twice the reading variance") {
  const std::size_t side = 16, n = side * side;
  const Image scene = random_image(side, 24);
  const RowSelection sel = select_rows(BasisKind::WalshHadamard, n, n, 25);
  const Measurement clean = measure_differential_binary(scene, sel);
  double acc = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    DifferentialOptions opts;
    opts.reading_noise_sigma = 2.0;
    opts.noise_seed = seed;
    const CVector d = measure_differential_binary(scene, sel, opts).samples - clean.samples;
    acc += d.real().squaredNorm();
    count += static_cast<std::size_t>(d.size());
  }
  CHECK(acc / double(count) == doctest::Approx(2.0 * 4.0).epsilon(0.05));
}
