#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "propen/design_set.hpp"

namespace propen {

/// Thresholds for pairing x with an improved neighbour x'.
///
/// delta_x bounds the SQUARED Euclidean distance ||x' - x||^2, not the plain
/// distance. The property gap g(x') - g(x) must lie in the half-open interval
/// (delta_y_lower, delta_y].
struct MatchConfig {
  double delta_x = 1.0;
  double delta_y = 1.0;
  double delta_y_lower = 0.0;

  void validate() const;
};

struct MatchPair {
  Eigen::Index source;
  Eigen::Index target;
  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct MatchedDataset {
  std::shared_ptr<const DesignSet> data;
  std::vector<MatchPair> pairs;  // sorted by (source, target)

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

// All ordered pairs (i, j) with ||x_j - x_i||^2 <= delta_x and
// y_j - y_i in (delta_y_lower, delta_y]. Plain O(n^2 m) double loop; a spatial
// index would only pay off well beyond the few thousand designs used here.
MatchedDataset build_matched_dataset(std::shared_ptr<const DesignSet> data, const MatchConfig& config);
MatchedDataset build_matched_dataset(const DesignSet& data, const MatchConfig& config);

// Target designs matched to seed_index, one per row (possibly zero rows).
Eigen::MatrixXd matches_of(const MatchedDataset& matched, Eigen::Index seed_index);

// Mean squared distance of the seed's matches to their centroid.
double match_variance(const MatchedDataset& matched, Eigen::Index seed_index);

// CSV with header "source_index,target_index".
void write_matched_csv(std::ostream& out, const MatchedDataset& matched);
void write_matched_csv(const std::filesystem::path& path, const MatchedDataset& matched);

}  // namespace propen
