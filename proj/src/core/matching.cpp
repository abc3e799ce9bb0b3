#include "propen/matching.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "propen/error.hpp"

namespace propen {

void MatchConfig::validate() const {
  if (!(delta_x > 0.0) || !std::isfinite(delta_x)) throw ConfigError("match.delta_x: must be > 0");
  if (!(delta_y > 0.0) || !std::isfinite(delta_y)) throw ConfigError("match.delta_y: must be > 0");
  if (!(delta_y_lower >= 0.0)) throw ConfigError("match.delta_y_lower: must be >= 0");
  if (!(delta_y_lower < delta_y)) throw ConfigError("match.delta_y_lower: must be < match.delta_y");
}

MatchedDataset build_matched_dataset(std::shared_ptr<const DesignSet> data, const MatchConfig& config) {
  if (!data) throw InvalidArgument("matching needs a design set");
  config.validate();
  data->validate();
  MatchedDataset out;
  out.data = data;
  const auto& x = data->designs;
  const auto& y = data->properties;
  const Eigen::Index n = data->size();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double gap = y[j] - y[i];
      if (!(gap > config.delta_y_lower && gap <= config.delta_y)) continue;
      if ((x.row(j) - x.row(i)).squaredNorm() <= config.delta_x) out.pairs.push_back({i, j});
    }
  }
  return out;
}

MatchedDataset build_matched_dataset(const DesignSet& data, const MatchConfig& config) {
  return build_matched_dataset(std::make_shared<const DesignSet>(data), config);
}

namespace {

std::pair<std::vector<MatchPair>::const_iterator, std::vector<MatchPair>::const_iterator> seed_range(
    const MatchedDataset& matched, Eigen::Index seed_index) {
  if (!matched.data) throw InvalidArgument("matched dataset has no design set");
  if (seed_index < 0 || seed_index >= matched.data->size())
    throw InvalidArgument("seed index " + std::to_string(seed_index) + " out of range [0, " +
                          std::to_string(matched.data->size()) + ")");
  auto lo = std::lower_bound(matched.pairs.begin(), matched.pairs.end(), seed_index,
                             [](const MatchPair& p, Eigen::Index s) { return p.source < s; });
  auto hi = std::upper_bound(lo, matched.pairs.end(), seed_index,
                             [](Eigen::Index s, const MatchPair& p) { return s < p.source; });
  return {lo, hi};
}

}  // namespace

Eigen::MatrixXd matches_of(const MatchedDataset& matched, Eigen::Index seed_index) {
  const auto [lo, hi] = seed_range(matched, seed_index);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(hi - lo), matched.data->dim());
  Eigen::Index r = 0;
  for (auto it = lo; it != hi; ++it) out.row(r++) = matched.data->designs.row(it->target);
  return out;
}

double match_variance(const MatchedDataset& matched, Eigen::Index seed_index) {
  const Eigen::MatrixXd targets = matches_of(matched, seed_index);
  if (targets.rows() == 0) throw InvalidArgument("seed " + std::to_string(seed_index) + " has no matches");
  const Eigen::RowVectorXd mean = targets.colwise().mean();
  return (targets.rowwise() - mean).rowwise().squaredNorm().mean();
}

void write_matched_csv(std::ostream& out, const MatchedDataset& matched) {
  out << "source_index,target_index\n";
  for (const auto& p : matched.pairs) out << p.source << ',' << p.target << '\n';
}

void write_matched_csv(const std::filesystem::path& path, const MatchedDataset& matched) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_matched_csv(out, matched);
}

}  // namespace propen
