#include <doctest.h>

#include <set>
#include <sstream>

#include "propen/error.hpp"
#include "propen/matching.hpp"
#include "propen/rng.hpp"
#include "test_util.hpp"

using namespace propen;

namespace {

DesignSet three_points() {
  DesignSet d;
  d.designs = (Eigen::MatrixXd(3, 1) << 0.0, 0.5, 3.0).finished();
  d.properties = Eigen::Vector3d(0.0, 0.3, 1.0);
  return d;
}

// Independent reference: enumerate every ordered pair and test the predicates
// written out coordinate by coordinate.
std::vector<MatchPair> reference_pairs(const DesignSet& d, const MatchConfig& c) {
  std::vector<MatchPair> out;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    for (Eigen::Index j = 0; j < d.size(); ++j) {
      double dist2 = 0.0;
      for (Eigen::Index k = 0; k < d.dim(); ++k) dist2 += (d.designs(j, k) - d.designs(i, k)) * (d.designs(j, k) - d.designs(i, k));
      const double gap = d.properties[j] - d.properties[i];
      if (dist2 <= c.delta_x && gap > c.delta_y_lower && gap <= c.delta_y) out.push_back({i, j});
    }
  return out;
}

DesignSet random_set(Rng& rng) {
  DesignSet d;
  const auto n = static_cast<Eigen::Index>(rng.below(201));
  const auto m = static_cast<Eigen::Index>(1 + rng.below(5));
  d.designs = testutil::random_matrix(rng, n, m);
  d.properties = testutil::random_vector(rng, n);
  // Some exact ties in the property to exercise the open lower bound.
  for (Eigen::Index i = 1; i < n; i += 7) d.properties[i] = d.properties[i - 1];
  return d;
}

}  // namespace

TEST_CASE("three-point example yields exactly one pair") {
  const MatchedDataset m = build_matched_dataset(three_points(), {1.0, 0.5, 0.0});
  REQUIRE(m.size() == 1);
  CHECK(m.pairs[0] == MatchPair{0, 1});
  const Eigen::MatrixXd t0 = matches_of(m, 0);
  REQUIRE(t0.rows() == 1);
  CHECK(t0(0, 0) == 0.5);
  CHECK(matches_of(m, 2).rows() == 0);
  CHECK_THROWS_AS(matches_of(m, 3), InvalidArgument);
}

TEST_CASE("empty and constant-property design sets have no pairs") {
  DesignSet empty;
  empty.designs.resize(0, 2);
  empty.properties.resize(0);
  CHECK(build_matched_dataset(empty, {}).empty());

  DesignSet flat;
  flat.designs = Eigen::MatrixXd::Zero(5, 2);
  flat.properties = Eigen::VectorXd::Constant(5, 1.5);
  CHECK(build_matched_dataset(flat, {10.0, 10.0, 0.0}).empty());
}

TEST_CASE("distance threshold is on the squared norm") {
  DesignSet d;
  d.designs = (Eigen::MatrixXd(2, 1) << 0.0, 0.9).finished();
  d.properties = Eigen::Vector2d(0.0, 0.1);
  CHECK(build_matched_dataset(d, {0.81, 1.0, 0.0}).size() == 1);
  CHECK(build_matched_dataset(d, {0.80, 1.0, 0.0}).empty());
}

TEST_CASE("match config validation") {
  CHECK_THROWS_AS((MatchConfig{0.0, 1.0, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((MatchConfig{1.0, 0.0, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((MatchConfig{1.0, 1.0, 1.0}.validate()), ConfigError);
  CHECK_THROWS_AS((MatchConfig{1.0, 1.0, -0.1}.validate()), ConfigError);
}

TEST_CASE("match_variance by hand") {
  DesignSet d;
  d.designs = (Eigen::MatrixXd(3, 2) << 1.0, 0.5, 0.0, 0.0, 2.0, 0.0).finished();
  d.properties = Eigen::Vector3d(0.0, 0.5, 0.5);
  const MatchedDataset m = build_matched_dataset(d, {4.0, 1.0, 0.0});
  CHECK(match_variance(m, 0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(match_variance(m, 1), InvalidArgument);

  const MatchedDataset single = build_matched_dataset(three_points(), {1.0, 0.5, 0.0});
  CHECK(match_variance(single, 0) == 0.0);
}

TEST_CASE("matched pairs equal the brute-force reference on random sets") {
  for (int trial = 0; trial < 100; ++trial) {
    Rng rng(derive_seed(2024, trial));
    const DesignSet d = random_set(rng);
    const MatchConfig c{0.2 + 3.0 * rng.uniform(), 0.1 + rng.uniform(), trial % 3 == 0 ? 0.05 : 0.0};
    const MatchedDataset m = build_matched_dataset(d, c);
    CAPTURE(trial);
    CHECK(m.pairs == reference_pairs(d, c));
  }
}

TEST_CASE("enlarging thresholds never removes a pair") {
  for (int trial = 0; trial < 30; ++trial) {
    Rng rng(derive_seed(77, trial));
    const DesignSet d = random_set(rng);
    const MatchConfig small{0.5, 0.5, 0.0};
    const auto base = build_matched_dataset(d, small).pairs;
    for (const MatchConfig big : {MatchConfig{1.5, 0.5, 0.0}, MatchConfig{0.5, 1.5, 0.0}, MatchConfig{1.5, 1.5, 0.0}}) {
      const auto larger = build_matched_dataset(d, big).pairs;
      const std::set<std::pair<Eigen::Index, Eigen::Index>> have = [&] {
        std::set<std::pair<Eigen::Index, Eigen::Index>> s;
        for (const auto& p : larger) s.insert({p.source, p.target});
        return s;
      }();
      for (const auto& p : base) CHECK(have.count({p.source, p.target}) == 1);
    }
  }
}

TEST_CASE("pairs are asymmetric, self-free and bounded in count") {
  for (int trial = 0; trial < 30; ++trial) {
    Rng rng(derive_seed(91, trial));
    const DesignSet d = random_set(rng);
    const auto pairs = build_matched_dataset(d, {2.0, 2.0, 0.0}).pairs;
    std::set<std::pair<Eigen::Index, Eigen::Index>> s;
    for (const auto& p : pairs) s.insert({p.source, p.target});
    for (const auto& p : pairs) {
      CHECK(p.source != p.target);
      CHECK(s.count({p.target, p.source}) == 0);
    }
    CHECK(pairs.size() <= static_cast<std::size_t>(d.size() * std::max<Eigen::Index>(d.size() - 1, 0)));
  }
}

TEST_CASE("match variance stays below four times delta_x") {
  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(derive_seed(5, trial));
    const DesignSet d = random_set(rng);
    const double dx = 0.3 + rng.uniform();
    const MatchedDataset m = build_matched_dataset(d, {dx, 3.0, 0.0});
    for (std::size_t k = 0; k < m.pairs.size(); ++k)
      if (k == 0 || m.pairs[k].source != m.pairs[k - 1].source) CHECK(match_variance(m, m.pairs[k].source) <= 4 * dx);
  }
}

TEST_CASE("matched CSV layout") {
  std::ostringstream out;
  write_matched_csv(out, build_matched_dataset(three_points(), {1.0, 0.5, 0.0}));
  CHECK(out.str() == "source_index,target_index\n0,1\n");
}

TEST_CASE("design set CSV round trip and line-numbered errors") {
  Rng rng(3);
  DesignSet d;
  d.designs = testutil::random_matrix(rng, 5, 3);
  d.properties = testutil::random_vector(rng, 5);
  std::stringstream buf;
  write_design_set_csv(buf, d);
  CHECK(buf.str().rfind("x0,x1,x2,y\n", 0) == 0);
  const DesignSet back = read_design_set_csv(buf);
  CHECK(back.designs == d.designs);
  CHECK(back.properties == d.properties);

  std::istringstream bad("x0,y\n1,2\n3,oops\n");
  try {
    read_design_set_csv(bad);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}
