#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "cpof/detection.hpp"
#include "cpof/types.hpp"

namespace cpof {

struct FlatBackground {
  double level = 0.0;
};

/// Seeded white noise low-pass filtered by a Gaussian of the given correlation
/// length (pixels), normalized to unit standard deviation, then mean + amplitude * noise.
struct TexturedBackground {
  double correlation_length = 4.0;
  double amplitude = 20.0;
  double mean = 60.0;
};

using Background = std::variant<FlatBackground, TexturedBackground>;

struct Placement {
  std::string label;
  std::size_t row = 0;
  std::size_t col = 0;
};

/// Each listed label is placed once, at a random position.
struct RandomLabels {
  std::vector<std::string> labels;
};

/// Uniform count in [min_count, max_count]; labels drawn uniformly from `pool`.
struct RandomCount {
  std::size_t min_count = 1;
  std::size_t max_count = 1;
  std::vector<std::string> pool;
};

using Placements = std::variant<std::vector<Placement>, RandomLabels, RandomCount>;

struct SceneSpec {
  std::size_t side = 128;
  Background background = TexturedBackground{};
  Placements placements = RandomLabels{{"frigate", "tanker"}};
  int bit_depth = 8;
  std::uint64_t seed = 0;
  // Random placements keep every pair of targets at least this far apart
  // (top-left corners, toroidal) in addition to disjoint bounding boxes.
  double min_separation = 0.0;
};

using TargetLibrary = std::map<std::string, Image>;

/// Built-in synthetic silhouettes: "frigate" and "tanker" (similar size and
/// brightness, different outline) plus "cross" for tests.
const TargetLibrary& builtin_targets();
Image builtin_target(const std::string& label);

struct GeneratedScene {
  Image scene;
  std::vector<GroundTruth> truth;
};

/// Composites targets additively onto the background, clipping to the bit depth
/// and rounding to integer levels. Random placements retry up to 10^4 times.
GeneratedScene generate_scene(const SceneSpec& spec, const TargetLibrary& targets);

Image make_background(const Background& background, std::size_t side, std::uint64_t seed, int bit_depth);

double psnr(const Image& reference, const Image& estimate, double peak = 255.0);

}  // namespace cpof
