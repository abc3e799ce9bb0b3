#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "propen/datasets.hpp"
#include "propen/error.hpp"
#include "propen/propen.hpp"
#include "propen/rng.hpp"
#include "test_util.hpp"

using namespace propen;

namespace {

// Wraps a 1-layer affine network as a PropEn model with identity scaling.
PropEnModel affine_model(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, IoMode mode = IoMode::X2X) {
  PropEnModel model;
  model.network = Mlp({DenseLayer{w, b, Activation::Identity}});
  model.variant.io_mode = mode;
  const Eigen::Index m = mode == IoMode::X2X ? w.cols() : w.cols() - 1;
  model.design_scaler = Standardizer::identity(m);
  model.property_min = -1e9;
  model.property_max = 1e9;
  return model;
}

// Plain gradient descent on sum_j ||z - x'_j||^2 + beta * k * ||z - x||^2 with
// a deliberately short step, never forming the mean.
Eigen::VectorXd numerical_minimizer(const Eigen::MatrixXd& targets, const Eigen::VectorXd& x, double beta) {
  const double k = static_cast<double>(targets.rows());
  const double lipschitz = 2.0 * k * (1.0 + beta);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(x.size());
  for (int it = 0; it < 100000; ++it) {
    Eigen::VectorXd grad = 2.0 * beta * k * (z - x);
    for (Eigen::Index j = 0; j < targets.rows(); ++j) grad += 2.0 * (z - targets.row(j).transpose());
    if (grad.norm() < 1e-13 * lipschitz) break;
    z -= 0.5 / lipschitz * grad;
  }
  return z;
}

DesignSet line_set(int n) {
  DesignSet d;
  d.designs.resize(n, 1);
  d.properties.resize(n);
  for (int i = 0; i < n; ++i) {
    d.designs(i, 0) = 0.5 * i;
    d.properties[i] = i;
  }
  return d;
}

TrainConfig long_training(int epochs, double lr) {
  TrainConfig c;
  c.epochs = epochs;
  c.learning_rate = lr;
  c.batch_size = 64;
  c.rng_seed = 3;
  return c;
}

}  // namespace

TEST_CASE("standardizer round trip and constant columns") {
  Eigen::MatrixXd rows(4, 2);
  rows << 1, 5, 3, 5, 5, 5, 7, 5;
  const Standardizer s = Standardizer::fit(rows);
  CHECK(s.mean[0] == doctest::Approx(4.0));
  CHECK(s.scale[0] == doctest::Approx(std::sqrt(5.0)));
  CHECK(s.scale[1] == 1e-6);
  const Eigen::Vector2d x(2.0, 5.0);
  CHECK((s.inverse(s.transform(x)) - x).norm() < 1e-12);
  CHECK_THROWS_AS(Standardizer::fit(Eigen::MatrixXd(0, 2)), InvalidArgument);
  CHECK_THROWS_AS(s.transform(Eigen::Vector3d::Zero()), DimensionError);
}

TEST_CASE("variant names") {
  CHECK(PropEnVariant{IoMode::X2X, 0.0}.name() == "propen_x2x");
  CHECK(PropEnVariant{IoMode::XY2XY, 0.0}.name() == "propen_xy2xy");
  CHECK(PropEnVariant{IoMode::X2X, 1.0}.name() == "propen_mix_x2x");
  CHECK(PropEnVariant{IoMode::XY2XY, 1.0}.name() == "propen_mix_xy2xy");
}

TEST_CASE("tabular minimizer examples") {
  DesignSet d;
  d.designs = (Eigen::MatrixXd(3, 2) << 0, 0, 2, 0, 0, 2).finished();
  d.properties = Eigen::Vector3d(0.0, 1.0, 1.0);
  const MatchedDataset m = build_matched_dataset(d, {4.0, 1.0, 0.0});
  CHECK((tabular_minimizer(m, 0, 1.0) - Eigen::Vector2d(0.5, 0.5)).norm() < 1e-15);
  CHECK((tabular_minimizer(m, 0, 0.0) - Eigen::Vector2d(1.0, 1.0)).norm() < 1e-15);
  CHECK_THROWS_AS(tabular_minimizer(m, 1, 0.0), InvalidArgument);
  CHECK_THROWS_AS(tabular_minimizer(m, 0, -1.0), InvalidArgument);

  DesignSet one;
  one.designs = (Eigen::MatrixXd(2, 1) << 0.0, 0.5).finished();
  one.properties = Eigen::Vector2d(0.0, 0.3);
  CHECK(tabular_minimizer(build_matched_dataset(one, {1.0, 0.5, 0.0}), 0, 0.0)[0] == 0.5);
}

TEST_CASE("tabular minimizer equals a numerical minimizer on random instances") {
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Rng rng(derive_seed(31, trial));
    const auto dim = static_cast<Eigen::Index>(1 + rng.below(6));
    const auto k = static_cast<Eigen::Index>(1 + rng.below(8));
    DesignSet d;
    d.designs = testutil::random_matrix(rng, k + 1, dim);
    d.properties = Eigen::VectorXd::LinSpaced(k + 1, 0.0, 1.0);
    const MatchedDataset m = build_matched_dataset(d, {1e9, 10.0, 0.0});
    const double beta = std::array{0.0, 0.5, 1.0, 3.0, 10.0}[trial % 5] * rng.uniform(0.5, 1.5);
    const Eigen::VectorXd closed = tabular_minimizer(m, 0, beta);
    const Eigen::VectorXd numeric = numerical_minimizer(matches_of(m, 0), d.design(0), beta);
    worst = std::max(worst, (closed - numeric).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("step size scales as 1 / (1 + beta)") {
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(derive_seed(41, trial));
    DesignSet d;
    d.designs = testutil::random_matrix(rng, 6, 3);
    d.properties = Eigen::VectorXd::LinSpaced(6, 0.0, 1.0);
    const MatchedDataset m = build_matched_dataset(d, {1e9, 10.0, 0.0});
    const double base = (tabular_minimizer(m, 0, 0.0) - d.design(0)).norm();
    for (double beta : {0.0, 0.5, 1.0, 3.0}) {
      const double step = (tabular_minimizer(m, 0, beta) - d.design(0)).norm();
      CHECK(std::abs(step * (1.0 + beta) - base) <= 1e-12 * std::max(1.0, base));
    }
  }
}

TEST_CASE("optimize: identity map converges at step 1") {
  const PropEnModel model = affine_model(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero());
  const Eigen::Vector2d seed(0.3, -1.0);
  const Trajectory t = optimize(model, seed, {});
  CHECK(t.converged);
  CHECK(t.steps_taken == 1);
  REQUIRE(t.states.size() == 2);
  CHECK(t.states[0] == seed);
  CHECK(t.states[1] == seed);
  CHECK(t.property_values.empty());
}

TEST_CASE("optimize: constant shift never converges") {
  const PropEnModel model = affine_model(Eigen::Matrix2d::Identity(), Eigen::Vector2d(0.1, 0.0));
  OptimizeConfig c;
  c.max_steps = 7;
  const Trajectory t = optimize(model, Eigen::Vector2d::Zero(), c, [](const Eigen::VectorXd& x) { return x[0]; });
  CHECK_FALSE(t.converged);
  CHECK(t.steps_taken == 7);
  CHECK(t.states.size() == 8);
  CHECK(t.final_state()[0] == doctest::Approx(0.7));
  CHECK(t.property_values.size() == 8);

  c.record_all = false;
  const Trajectory last = optimize(model, Eigen::Vector2d::Zero(), c);
  CHECK(last.states.size() == 2);
  CHECK(last.steps == std::vector<int>{0, 7});
}

TEST_CASE("optimize: non-finite state aborts with a partial trajectory") {
  PropEnModel model = affine_model(Eigen::Matrix2d::Identity() * 1e200, Eigen::Vector2d::Zero());
  OptimizeConfig c;
  c.max_steps = 5;
  const Trajectory t = optimize(model, Eigen::Vector2d(1.0, 1.0), c);
  CHECK(t.aborted());
  CHECK(t.steps_taken == 1);
  CHECK(t.states.size() == 2);
  CHECK(t.diagnostic.find("step 2") != std::string::npos);
}

TEST_CASE("optimize: xy2xy feeds the property coordinate back") {
  Eigen::Matrix3d w = Eigen::Matrix3d::Identity();
  w(0, 2) = 1.0;  // x0 += y
  Eigen::Vector3d b(0.0, 0.0, 1.0);  // y += 1
  const PropEnModel model = affine_model(w, b, IoMode::XY2XY);
  OptimizeConfig c;
  c.max_steps = 3;
  const Trajectory t = optimize(model, Eigen::Vector2d::Zero(), c, {}, 1.0);
  REQUIRE(t.states.size() == 4);
  CHECK(t.states[1][0] == doctest::Approx(1.0));
  CHECK(t.states[2][0] == doctest::Approx(3.0));
  CHECK(t.states[3][0] == doctest::Approx(6.0));
  CHECK_THROWS_AS(optimize(model, Eigen::Vector2d::Zero(), c), InvalidArgument);
  CHECK_THROWS_AS(optimize(model, Eigen::Vector3d::Zero(), c, {}, 0.0), DimensionError);
}

TEST_CASE("optimize config validation") {
  OptimizeConfig c;
  c.max_steps = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.max_steps = 1;
  c.convergence_eps = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("train_propen rejects an empty matched set") {
  const MatchedDataset empty = build_matched_dataset(line_set(3), {0.01, 1.0, 0.0});
  CHECK_THROWS_AS(train_propen(empty, {}, {}, {}), EmptyMatchError);
}

TEST_CASE("train_propen learns a realizable one-to-one map") {
  const MatchedDataset m = build_matched_dataset(line_set(6), {0.25, 1.0, 0.0});
  REQUIRE(m.size() == 5);
  const PropEnTrainResult r = train_propen(m, {}, {}, long_training(3000, 1e-2));
  CHECK(r.loss_history.back() < 1e-4);
  for (const auto& p : m.pairs) {
    const Trajectory t = optimize(r.model, m.data->design(p.source), {1, 1e-4, true});
    CHECK(t.states[1][0] == doctest::Approx(m.data->designs(p.target, 0)).epsilon(1e-2));
  }
}

TEST_CASE("a huge mix weight pins the model to the identity") {
  const MatchedDataset m = build_matched_dataset(line_set(6), {0.25, 1.0, 0.0});
  const PropEnTrainResult r = train_propen(m, {IoMode::X2X, 1e6}, {}, long_training(3000, 1e-2));
  for (const auto& p : m.pairs) {
    const double x = m.data->designs(p.source, 0);
    const Trajectory t = optimize(r.model, m.data->design(p.source), {1, 1e-4, true});
    CHECK(std::abs(t.states[1][0] - x) < 1e-2);
  }
}

TEST_CASE("single matched pair: f(0) approaches 0.5") {
  DesignSet d;
  d.designs = (Eigen::MatrixXd(3, 1) << 0.0, 0.5, 3.0).finished();
  d.properties = Eigen::Vector3d(0.0, 0.3, 1.0);
  const MatchedDataset m = build_matched_dataset(d, {1.0, 0.5, 0.0});
  const PropEnTrainResult r = train_propen(m, {}, {}, long_training(2000, 1e-2));
  const Trajectory t = optimize(r.model, Eigen::VectorXd::Zero(1), {1, 1e-4, true});
  CHECK(std::abs(t.states[1][0] - 0.5) < 1e-2);
}

TEST_CASE("training is deterministic and the model file round-trips") {
  ToyConfig tc;
  tc.n_samples = 60;
  DesignSet d = generate_toy(tc);
  d.properties = d.designs.col(0);
  const MatchedDataset m = build_matched_dataset(d, {1.0, 1.0, 0.0});
  for (IoMode mode : {IoMode::X2X, IoMode::XY2XY}) {
    const auto a = train_propen(m, {mode, 0.5}, {}, long_training(20, 1e-3));
    const auto b = train_propen(m, {mode, 0.5}, {}, long_training(20, 1e-3));
    CHECK(a.model.network == b.model.network);
    CHECK(a.loss_history == b.loss_history);

    std::stringstream buf;
    write_propen_model(buf, a.model);
    const PropEnModel back = read_propen_model(buf);
    CHECK(back.network == a.model.network);
    CHECK(back.variant.io_mode == mode);
    CHECK(back.variant.mix_beta == 0.5);
    CHECK(back.design_scaler.mean == a.model.design_scaler.mean);
    CHECK(back.property_max == a.model.property_max);
  }
  std::istringstream junk("PRPNxxxx");
  CHECK_THROWS_AS(read_propen_model(junk), IoError);
}

TEST_CASE("trained x2x steps align with the tabular step on well-matched seeds") {
  ToyConfig tc;
  tc.n_samples = 200;
  DesignSet d = generate_toy(tc);
  const KdeModel kde(d.designs, 0.3);
  d.properties = kde.log_density_rows(d.designs);
  const MatchedDataset m = build_matched_dataset(d, {1.0, 1.0, 0.0});
  const PropEnTrainResult r = train_propen(m, {}, {}, long_training(500, 1e-3));
  int checked = 0, aligned = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (matches_of(m, i).rows() < 5) continue;
    const Eigen::VectorXd x = d.design(i);
    const Eigen::VectorXd tab = tabular_minimizer(m, i, 0.0) - x;
    const Eigen::VectorXd mod = optimize(r.model, x, {1, 1e-4, true}).states[1] - x;
    ++checked;
    if (tab.dot(mod) / (tab.norm() * mod.norm()) > 0.9) ++aligned;
  }
  REQUIRE(checked > 20);
  CHECK(static_cast<double>(aligned) / checked > 0.8);
}

TEST_CASE("iterating the tabular minimizer raises the median KDE property") {
  ToyConfig tc;
  tc.n_samples = 200;
  tc.rng_seed = 4;
  DesignSet d = generate_toy(tc);
  const KdeModel kde(d.designs, 0.3);
  d.properties = kde.log_density_rows(d.designs);
  const MatchedDataset m = build_matched_dataset(d, {1.0, 1.0, 0.0});
  std::vector<double> before, after;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (matches_of(m, i).rows() == 0) continue;
    before.push_back(d.properties[i]);
    after.push_back(kde.log_density(tabular_minimizer(m, i, 0.0)));
  }
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  REQUIRE(!before.empty());
  CHECK(median(after) > median(before));
}
