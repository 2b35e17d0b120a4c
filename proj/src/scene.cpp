#include "cpof/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string_view>

#include "cpof/rng.hpp"
#include "cpof/xforms.hpp"

namespace cpof {

namespace {

constexpr double kSilhouetteLevel = 150.0;
constexpr int kMaxPlacementAttempts = 10000;

Image from_art(std::initializer_list<std::string_view> rows) {
  const auto h = static_cast<Eigen::Index>(rows.size());
  const auto w = static_cast<Eigen::Index>(rows.begin()->size());
  Image img = Image::Zero(h, w);
  Eigen::Index r = 0;
  for (std::string_view line : rows) {
    for (Eigen::Index c = 0; c < w; ++c) {
      if (line[static_cast<std::size_t>(c)] == '#') img(r, c) = kSilhouetteLevel;
    }
    ++r;
  }
  return img;
}

TargetLibrary make_builtin() {
  TargetLibrary lib;
  lib["frigate"] = from_art({
      "......##....#.......",
      ".....####...##......",
      "..################..",
      ".##################.",
      "####################",
      ".##################.",
      "..################..",
      "...##############...",
  });
  lib["tanker"] = from_art({
      "###.................",
      "###.................",
      "###################.",
      "####################",
      "####################",
      "####################",
      "###################.",
      "##################..",
  });
  lib["cross"] = from_art({
      "...###...",
      "...###...",
      "...###...",
      "#########",
      "#########",
      "#########",
      "...###...",
      "...###...",
      "...###...",
  });
  return lib;
}

struct Box {
  std::size_t row, col, rows, cols;
};

bool overlaps(const Box& a, const Box& b) {
  return a.row < b.row + b.rows && b.row < a.row + a.rows && a.col < b.col + b.cols && b.col < a.col + a.cols;
}

const Image& lookup(const TargetLibrary& targets, const std::string& label) {
  auto it = targets.find(label);
  if (it == targets.end()) throw ParameterError("unknown target label '" + label + "'");
  return it->second;
}

}  // namespace

const TargetLibrary& builtin_targets() {
  static const TargetLibrary lib = make_builtin();
  return lib;
}

Image builtin_target(const std::string& label) { return lookup(builtin_targets(), label); }

Image make_background(const Background& background, std::size_t side, std::uint64_t seed, int bit_depth) {
  const auto s = static_cast<Eigen::Index>(side);
  const double max_level = std::ldexp(1.0, bit_depth) - 1.0;
  if (const auto* flat_bg = std::get_if<FlatBackground>(&background)) {
    return Image::Constant(s, s, std::clamp(std::round(flat_bg->level), 0.0, max_level));
  }
  const auto& tex = std::get<TexturedBackground>(background);
  if (!(tex.correlation_length >= 0.0)) throw ParameterError("textured background: negative correlation length");

  Random rng(seed);
  Plane noise(s, s);
  for (Eigen::Index k = 0; k < noise.size(); ++k) noise.data()[k] = rng.normal();
  transform_2d_inplace<double>(noise.data(), side, BasisKind::Fourier, Direction::Forward);
  // Gaussian blur with standard deviation correlation_length (pixels).
  const double c = 2.0 * std::numbers::pi * std::numbers::pi * tex.correlation_length * tex.correlation_length;
  for (Eigen::Index r = 0; r < s; ++r) {
    const double fy = static_cast<double>(r < s / 2 ? r : r - s) / static_cast<double>(side);
    for (Eigen::Index q = 0; q < s; ++q) {
      const double fx = static_cast<double>(q < s / 2 ? q : q - s) / static_cast<double>(side);
      noise(r, q) *= std::exp(-c * (fx * fx + fy * fy));
    }
  }
  noise(0, 0) = 0.0;
  transform_2d_inplace<double>(noise.data(), side, BasisKind::Fourier, Direction::Adjoint);
  Image field = noise.real();
  const double stddev = std::sqrt(field.squaredNorm() / static_cast<double>(field.size()));
  if (stddev > 0.0) field /= stddev;
  Image out = (tex.mean + tex.amplitude * field.array()).round().cwiseMax(0.0).cwiseMin(max_level);
  return out;
}

GeneratedScene generate_scene(const SceneSpec& spec, const TargetLibrary& targets) {
  if (!is_power_of_two(spec.side)) throw SizeError("generate_scene: side must be a power of two");
  if (spec.bit_depth < 1 || spec.bit_depth > 16) throw ParameterError("generate_scene: bit depth must be in [1, 16]");
  const double max_level = std::ldexp(1.0, spec.bit_depth) - 1.0;

  Random rng(derive_seed({spec.seed, 0x706c616365ULL}));
  std::vector<GroundTruth> truth;
  std::vector<Box> boxes;

  auto fits = [&](const Box& box) {
    return box.row + box.rows <= spec.side && box.col + box.cols <= spec.side;
  };
  auto free = [&](const Box& box) {
    for (const Box& other : boxes) {
      if (overlaps(box, other)) return false;
      if (toroidal_distance(box.row, box.col, other.row, other.col, spec.side) < spec.min_separation) return false;
    }
    return true;
  };
  auto place_random = [&](const std::string& label) {
    const Image& t = lookup(targets, label);
    const auto h = static_cast<std::size_t>(t.rows());
    const auto w = static_cast<std::size_t>(t.cols());
    if (h > spec.side || w > spec.side) throw SizeError("generate_scene: target '" + label + "' larger than scene");
    for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
      const Box box{rng.below(spec.side - h + 1), rng.below(spec.side - w + 1), h, w};
      if (free(box)) {
        boxes.push_back(box);
        truth.push_back(GroundTruth{label, box.row, box.col});
        return;
      }
    }
    throw CongestionError("generate_scene: no room for target '" + label + "' after " +
                          std::to_string(kMaxPlacementAttempts) + " attempts");
  };

  if (const auto* fixed = std::get_if<std::vector<Placement>>(&spec.placements)) {
    for (const Placement& p : *fixed) {
      const Image& t = lookup(targets, p.label);
      const Box box{p.row, p.col, static_cast<std::size_t>(t.rows()), static_cast<std::size_t>(t.cols())};
      if (!fits(box)) throw ParameterError("generate_scene: target '" + p.label + "' extends outside the scene");
      for (const Box& other : boxes) {
        if (overlaps(box, other)) throw ParameterError("generate_scene: fixed placements overlap");
      }
      boxes.push_back(box);
      truth.push_back(GroundTruth{p.label, p.row, p.col});
    }
  } else if (const auto* labels = std::get_if<RandomLabels>(&spec.placements)) {
    for (const std::string& label : labels->labels) place_random(label);
  } else {
    const auto& rc = std::get<RandomCount>(spec.placements);
    if (rc.pool.empty() || rc.min_count > rc.max_count) {
      throw ParameterError("generate_scene: random count needs a label pool and min <= max");
    }
    const std::size_t count = rc.min_count + rng.below(rc.max_count - rc.min_count + 1);
    for (std::size_t i = 0; i < count; ++i) place_random(rc.pool[rng.below(rc.pool.size())]);
  }

  Image scene = make_background(spec.background, spec.side, derive_seed({spec.seed, 0x6267ULL}), spec.bit_depth);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const Image& t = lookup(targets, truth[i].label);
    scene.block(static_cast<Eigen::Index>(boxes[i].row), static_cast<Eigen::Index>(boxes[i].col), t.rows(),
                t.cols()) += t;
  }
  scene = scene.array().round().cwiseMax(0.0).cwiseMin(max_level);
  return GeneratedScene{std::move(scene), std::move(truth)};
}

double psnr(const Image& reference, const Image& estimate, double peak) {
  if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols()) {
    throw SizeError("psnr: image shapes differ");
  }
  const double mse = (reference - estimate).squaredNorm() / static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

}  // namespace cpof
