#include <doctest.h>

#include <cmath>

#include "propen/baseline.hpp"
#include "propen/datasets.hpp"
#include "propen/error.hpp"
#include "propen/rng.hpp"
#include "test_util.hpp"

using namespace propen;

namespace {

DesignSet toy_with_property(int n, std::uint64_t seed) {
  ToyConfig tc;
  tc.n_samples = n;
  tc.rng_seed = seed;
  DesignSet d = generate_toy(tc);
  d.properties = d.designs.col(0) + 0.5 * d.designs.col(1);
  return d;
}

TrainConfig short_training(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.learning_rate = 1e-3;
  c.rng_seed = 5;
  return c;
}

// Identity encoder/decoder in 2-dim with a linear discriminator w . z.
ExplicitGuidanceModel linear_model(const Eigen::Vector2d& w) {
  ExplicitGuidanceModel m;
  m.encoder = Mlp({DenseLayer{Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero(), Activation::Identity}});
  m.decoder = m.encoder;
  m.discriminator = Mlp({DenseLayer{w.transpose(), Eigen::VectorXd::Zero(1), Activation::Identity}});
  m.design_scaler = Standardizer::identity(2);
  m.latent_scaler = Standardizer::identity(2);
  return m;
}

}  // namespace

TEST_CASE("single training point is reconstructed and predicted") {
  DesignSet d;
  d.designs = (Eigen::MatrixXd(1, 2) << 0.7, -0.2).finished();
  d.properties = Eigen::VectorXd::Constant(1, 1.3);
  TrainConfig c = short_training(2000);
  c.learning_rate = 1e-2;
  const ExplicitTrainResult r = train_explicit(d, {}, c);
  const Eigen::VectorXd z = r.model.encode(d.design(0));
  CHECK((r.model.decode(z) - d.design(0)).norm() < 1e-4);
  CHECK(std::abs(r.model.predict(z) - 1.3) < 1e-4);
}

TEST_CASE("discriminator latent gradient matches finite differences") {
  const ExplicitTrainResult r = train_explicit(toy_with_property(80, 1), {}, short_training(30));
  Rng rng(2);
  for (int k = 0; k < 10; ++k) {
    const Eigen::VectorXd z = testutil::random_vector(rng, r.model.latent_dim());
    const Eigen::VectorXd g = r.model.latent_gradient(z);
    Eigen::VectorXd fd(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      Eigen::VectorXd up = z, dn = z;
      up[i] += 1e-6;
      dn[i] -= 1e-6;
      fd[i] = (r.model.discriminator.forward(up)[0] - r.model.discriminator.forward(dn)[0]) / 2e-6;
    }
    CHECK(testutil::max_relative_error(g, fd) < 1e-4);
  }
}

TEST_CASE("explicit training is deterministic per seed") {
  const DesignSet d = toy_with_property(60, 2);
  const auto a = train_explicit(d, {}, short_training(10));
  const auto b = train_explicit(d, {}, short_training(10));
  CHECK(a.model.encoder == b.model.encoder);
  CHECK(a.model.decoder == b.model.decoder);
  CHECK(a.model.discriminator == b.model.discriminator);
  CHECK(a.loss_history == b.loss_history);
  DesignSet empty;
  empty.designs.resize(0, 2);
  empty.properties.resize(0);
  CHECK_THROWS_AS(train_explicit(empty, {}, short_training(1)), InvalidArgument);
}

TEST_CASE("guidance with zero steps or zero step size stays at the reconstruction") {
  const ExplicitTrainResult r = train_explicit(toy_with_property(60, 3), {}, short_training(10));
  const Eigen::Vector2d seed(0.5, 1.5);
  const Eigen::VectorXd recon = r.model.decode(r.model.encode(seed));

  const Trajectory none = guide(r.model, seed, {0.01, 0});
  REQUIRE(none.states.size() == 1);
  CHECK((none.states[0] - recon).norm() < 1e-12);

  const Trajectory still = guide(r.model, seed, {0.0, 5});
  REQUIRE(still.states.size() == 6);
  for (const auto& s : still.states) CHECK((s - recon).norm() < 1e-12);
}

TEST_CASE("linear discriminator ascends along w") {
  const Eigen::Vector2d w(0.3, -0.4);
  const ExplicitGuidanceModel m = linear_model(w);
  const Eigen::Vector2d seed(1.0, 2.0);
  const Trajectory t = guide(m, seed, {0.05, 4}, [](const Eigen::VectorXd& x) { return x.sum(); });
  REQUIRE(t.states.size() == 5);
  for (int k = 0; k < 5; ++k) CHECK((t.states[static_cast<std::size_t>(k)] - (seed + k * 0.05 * w)).norm() < 1e-12);
  CHECK(t.property_values.size() == 5);
  CHECK(t.steps_taken == 4);
}

TEST_CASE("guidance validation and dimension checks") {
  const ExplicitGuidanceModel m = linear_model(Eigen::Vector2d(1.0, 0.0));
  CHECK_THROWS_AS(guide(m, Eigen::Vector2d::Zero(), {-0.1, 3}), ConfigError);
  CHECK_THROWS_AS(guide(m, Eigen::Vector2d::Zero(), {0.1, -1}), ConfigError);
  CHECK_THROWS_AS(guide(m, Eigen::Vector3d::Zero(), {0.1, 1}), DimensionError);
}

TEST_CASE("non-finite latent aborts guidance") {
  ExplicitGuidanceModel m = linear_model(Eigen::Vector2d(1e308, 0.0));
  const Trajectory t = guide(m, Eigen::Vector2d(1e308, 0.0), {10.0, 3});
  CHECK(t.aborted());
  CHECK(t.states.size() == 1);
}

TEST_CASE("small guidance steps never decrease the surrogate") {
  const ExplicitTrainResult r = train_explicit(toy_with_property(100, 4), {}, short_training(50));
  const DesignSet seeds = toy_with_property(10, 9);
  for (Eigen::Index i = 0; i < seeds.size(); ++i) {
    Eigen::VectorXd u = r.model.latent_scaler.transform(r.model.encode(seeds.design(i)));
    double prev = r.model.discriminator.forward(r.model.latent_scaler.inverse(u))[0];
    for (int t = 0; t < 30; ++t) {
      const Eigen::VectorXd z = r.model.latent_scaler.inverse(u);
      u += 1e-3 * r.model.latent_scaler.scale.cwiseProduct(r.model.latent_gradient(z));
      const double next = r.model.discriminator.forward(r.model.latent_scaler.inverse(u))[0];
      CHECK(next >= prev - 1e-12);
      prev = next;
    }
  }
}
