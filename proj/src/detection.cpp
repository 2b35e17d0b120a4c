#include "cpof/detection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

namespace cpof {

void Dictionary::add(std::string label, const Image& reference, double zero_tol) {
  if (find(label) != nullptr) throw ParameterError("Dictionary: duplicate label '" + label + "'");
  const double energy = reference.squaredNorm();
  if (!(energy > 0.0)) throw ParameterError("Dictionary: reference '" + label + "' has zero energy");
  CirculantOperator pof = make_pof(embed_reference(reference, side_), zero_tol);
  entries_.push_back(DictionaryEntry{std::move(label), reference, std::move(pof), energy});
}

const DictionaryEntry* Dictionary::find(const std::string& label) const {
  for (const auto& e : entries_) {
    if (e.label == label) return &e;
  }
  return nullptr;
}

std::size_t Dictionary::max_target_dimension() const {
  std::size_t dim = 0;
  for (const auto& e : entries_) {
    dim = std::max({dim, static_cast<std::size_t>(e.reference.rows()), static_cast<std::size_t>(e.reference.cols())});
  }
  return dim;
}

double toroidal_distance(std::size_t r1, std::size_t c1, std::size_t r2, std::size_t c2, std::size_t side) {
  auto wrap = [side](std::size_t a, std::size_t b) {
    const std::size_t d = a > b ? a - b : b - a;
    return static_cast<double>(std::min(d % side, side - d % side));
  };
  return std::hypot(wrap(r1, r2), wrap(c1, c2));
}

Image score_plane(const CorrelationPlane& s, double reference_energy) {
  if (!(reference_energy > 0.0)) throw ParameterError("score_plane: reference energy must be positive");
  return s.cwiseAbs2() / reference_energy;
}

std::vector<Peak> find_peaks(const Image& score, std::size_t max_peaks, double exclusion_radius,
                             double min_score_ratio) {
  std::vector<Peak> peaks;
  if (max_peaks == 0 || score.size() == 0) return peaks;
  const auto cols = static_cast<std::size_t>(score.cols());
  const auto side = static_cast<std::size_t>(std::max(score.rows(), score.cols()));

  std::vector<std::size_t> order;
  order.reserve(static_cast<std::size_t>(score.size()));
  for (Eigen::Index k = 0; k < score.size(); ++k) {
    if (score.data()[k] > 0.0) order.push_back(static_cast<std::size_t>(k));
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = score.data()[a];
    const double sb = score.data()[b];
    return sa > sb || (sa == sb && a < b);
  });

  for (std::size_t k : order) {
    const double value = score.data()[k];
    if (!peaks.empty() && value < min_score_ratio * peaks.front().score) break;
    const std::size_t row = k / cols;
    const std::size_t col = k % cols;
    const bool suppressed = std::any_of(peaks.begin(), peaks.end(), [&](const Peak& p) {
      return toroidal_distance(row, col, p.row, p.col, side) < exclusion_radius;
    });
    if (suppressed) continue;
    peaks.push_back(Peak{row, col, value});
    if (peaks.size() == max_peaks) break;
  }
  return peaks;
}

DetectionReport classify_and_localize(const std::vector<std::pair<std::string, CorrelationPlane>>& planes,
                                      const Dictionary& dict, const ClassifyOptions& options) {
  if (dict.empty()) throw ParameterError("classify_and_localize: empty dictionary");
  if (planes.size() != dict.size()) {
    throw ParameterError("classify_and_localize: " + std::to_string(planes.size()) + " planes for " +
                         std::to_string(dict.size()) + " dictionary entries");
  }
  const double radius = options.exclusion_radius > 0.0 ? options.exclusion_radius
                                                       : static_cast<double>(dict.max_target_dimension());
  const std::size_t per_label = options.expected_count.value_or(64);
  const std::size_t side = dict.side();

  struct Candidate {
    Detection det;
    std::size_t label_rank;
  };
  std::vector<Candidate> candidates;
  for (const auto& [label, plane] : planes) {
    const DictionaryEntry* entry = dict.find(label);
    if (entry == nullptr) throw ParameterError("classify_and_localize: label '" + label + "' not in dictionary");
    if (static_cast<std::size_t>(plane.rows()) != side || plane.rows() != plane.cols()) {
      throw SizeError("classify_and_localize: plane for '" + label + "' does not match the dictionary scene size");
    }
    const auto rank = static_cast<std::size_t>(entry - dict.entries().data());
    for (const Peak& p : find_peaks(score_plane(plane, entry->reference_energy), per_label, radius)) {
      candidates.push_back(Candidate{Detection{label, p.row, p.col, p.score, false}, rank});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [side](const Candidate& a, const Candidate& b) {
    if (a.det.score != b.det.score) return a.det.score > b.det.score;
    const std::size_t ka = a.det.row * side + a.det.col;
    const std::size_t kb = b.det.row * side + b.det.col;
    if (ka != kb) return ka < kb;
    return a.label_rank < b.label_rank;
  });

  DetectionReport report;
  for (const Candidate& c : candidates) {
    if (options.expected_count && report.detections.size() == *options.expected_count) break;
    if (!options.expected_count && !report.detections.empty() &&
        c.det.score < options.min_score_ratio * report.detections.front().score) {
      break;
    }
    const bool contested = std::any_of(report.detections.begin(), report.detections.end(), [&](const Detection& d) {
      return toroidal_distance(c.det.row, c.det.col, d.row, d.col, side) < radius;
    });
    if (!contested) report.detections.push_back(c.det);
  }
  return report;
}

namespace {

// Maximum bipartite matching (Kuhn); returns truth index matched to each detection or -1.
std::vector<int> match(const std::vector<Detection>& dets, const std::vector<GroundTruth>& truth, std::size_t side,
                       double radius) {
  const auto compatible = [&](std::size_t d, std::size_t t) {
    return dets[d].label == truth[t].label &&
           toroidal_distance(dets[d].row, dets[d].col, truth[t].row, truth[t].col, side) <= radius;
  };
  std::vector<int> truth_owner(truth.size(), -1);
  std::function<bool(std::size_t, std::vector<bool>&)> augment = [&](std::size_t d, std::vector<bool>& seen) {
    for (std::size_t t = 0; t < truth.size(); ++t) {
      if (seen[t] || !compatible(d, t)) continue;
      seen[t] = true;
      if (truth_owner[t] < 0 || augment(static_cast<std::size_t>(truth_owner[t]), seen)) {
        truth_owner[t] = static_cast<int>(d);
        return true;
      }
    }
    return false;
  };
  for (std::size_t d = 0; d < dets.size(); ++d) {
    std::vector<bool> seen(truth.size(), false);
    augment(d, seen);
  }
  std::vector<int> det_match(dets.size(), -1);
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (truth_owner[t] >= 0) det_match[static_cast<std::size_t>(truth_owner[t])] = static_cast<int>(t);
  }
  return det_match;
}

}  // namespace

bool score_success(const DetectionReport& report, const std::vector<GroundTruth>& truth, std::size_t side,
                   double radius) {
  if (truth.empty() || report.detections.size() != truth.size()) return false;
  const std::vector<int> m = match(report.detections, truth, side, radius);
  return std::all_of(m.begin(), m.end(), [](int t) { return t >= 0; });
}

bool mark_matches(DetectionReport& report, const std::vector<GroundTruth>& truth, std::size_t side, double radius) {
  const std::vector<int> m = match(report.detections, truth, side, radius);
  for (std::size_t d = 0; d < report.detections.size(); ++d) report.detections[d].matched = m[d] >= 0;
  report.ground_truth = truth;
  report.success = score_success(report, truth, side, radius);
  return *report.success;
}

void write_report_csv(std::ostream& os, const DetectionReport& report) {
  os << "label,row,col,score,matched\n";
  char buf[64];
  for (const Detection& d : report.detections) {
    std::snprintf(buf, sizeof buf, "%.17g", d.score);
    os << d.label << ',' << d.row << ',' << d.col << ',' << buf << ',' << (d.matched ? "true" : "false") << '\n';
  }
}

}  // namespace cpof
