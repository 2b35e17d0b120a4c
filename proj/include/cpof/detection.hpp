#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cpof/filtering.hpp"
#include "cpof/types.hpp"

namespace cpof {

struct DictionaryEntry {
  std::string label;
  Image reference;  // target image at its native size
  CirculantOperator pof;
  double reference_energy = 0.0;  // ||r||^2
};

/// Labelled reference targets and their matched POFs for one scene size.
class Dictionary {
 public:
  explicit Dictionary(std::size_t side) : side_(side) {}

  /// Builds the POF from `reference` zero-padded to the scene size. Throws
  /// ParameterError on duplicate labels or references that do not fit.
  void add(std::string label, const Image& reference, double zero_tol = kDefaultZeroTol);

  const std::vector<DictionaryEntry>& entries() const { return entries_; }
  const DictionaryEntry* find(const std::string& label) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t side() const { return side_; }
  /// Largest reference height or width.
  std::size_t max_target_dimension() const;

 private:
  std::size_t side_;
  std::vector<DictionaryEntry> entries_;
};

struct Peak {
  std::size_t row = 0;
  std::size_t col = 0;
  double score = 0.0;
};

struct GroundTruth {
  std::string label;
  std::size_t row = 0;
  std::size_t col = 0;
};

struct Detection {
  std::string label;
  std::size_t row = 0;
  std::size_t col = 0;
  double score = 0.0;
  bool matched = false;
};

struct DetectionReport {
  std::vector<Detection> detections;  // descending score
  std::vector<GroundTruth> ground_truth;
  std::optional<bool> success;
};

/// Shortest distance between two pixels on the side x side torus.
double toroidal_distance(std::size_t r1, std::size_t c1, std::size_t r2, std::size_t c2, std::size_t side);

/// |s|^2 / ||r||^2 elementwise.
Image score_plane(const CorrelationPlane& s, double reference_energy);

/// Greedy non-maximum suppression. Candidates are visited by descending score
/// (row-major order on ties); a candidate closer than `exclusion_radius`
/// (toroidal) to an accepted peak is dropped. Stops after `max_peaks` or once a
/// score falls below min_score_ratio times the first.
std::vector<Peak> find_peaks(const Image& score, std::size_t max_peaks, double exclusion_radius,
                             double min_score_ratio = 0.0);

struct ClassifyOptions {
  std::optional<std::size_t> expected_count;  // nullopt: keep all above threshold
  double exclusion_radius = 0.0;              // <= 0: dictionary max target dimension
  double min_score_ratio = 0.5;               // threshold for unknown-count mode
};

/// One correlation plane per dictionary entry, normalized by reference energy,
/// merged with cross-label non-maximum suppression (the higher score keeps a
/// contested location).
DetectionReport classify_and_localize(const std::vector<std::pair<std::string, CorrelationPlane>>& planes,
                                      const Dictionary& dict, const ClassifyOptions& options);

/// True iff detections and truth admit a one-to-one matching with equal labels
/// and toroidal distance <= radius.
bool score_success(const DetectionReport& report, const std::vector<GroundTruth>& truth, std::size_t side,
                   double radius = 5.0);

/// Like score_success, but also records the truth, sets the per-detection
/// matched flags and the success field.
bool mark_matches(DetectionReport& report, const std::vector<GroundTruth>& truth, std::size_t side,
                  double radius = 5.0);

/// CSV: label,row,col,score,matched
void write_report_csv(std::ostream& os, const DetectionReport& report);

}  // namespace cpof
