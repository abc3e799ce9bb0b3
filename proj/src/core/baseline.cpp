#include "propen/baseline.hpp"

#include <cmath>
#include <numeric>

#include "propen/error.hpp"
#include "propen/rng.hpp"

namespace propen {

Eigen::VectorXd ExplicitGuidanceModel::encode(const Eigen::VectorXd& design) const {
  return encoder.forward(design_scaler.transform(design));
}

Eigen::VectorXd ExplicitGuidanceModel::decode(const Eigen::VectorXd& latent) const {
  return design_scaler.inverse(decoder.forward(latent));
}

double ExplicitGuidanceModel::predict(const Eigen::VectorXd& latent) const {
  return discriminator.forward(latent)[0] * property_scale + property_mean;
}

Eigen::VectorXd ExplicitGuidanceModel::latent_gradient(const Eigen::VectorXd& latent) const {
  return discriminator.input_gradient(latent);
}

ExplicitTrainResult train_explicit(const DesignSet& data, const ArchSpec& arch, const TrainConfig& config) {
  if (data.size() == 0) throw InvalidArgument("explicit guidance needs a nonempty training set");
  data.validate();
  arch.validate();
  config.validate();

  const auto m = static_cast<int>(data.dim());
  const Eigen::Index n = data.size();
  ExplicitGuidanceModel model;
  model.design_scaler = Standardizer::fit(data.designs);
  const Standardizer ys = Standardizer::fit(data.properties);
  model.property_mean = ys.mean[0];
  model.property_scale = ys.scale[0];

  Eigen::MatrixXd x(m, n);
  Eigen::MatrixXd y(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x.col(i) = model.design_scaler.transform(data.design(i));
    y(0, i) = (data.properties[i] - model.property_mean) / model.property_scale;
  }

  model.encoder = Mlp::glorot(m, arch.encoder(), derive_seed(config.rng_seed, 0xE1));
  model.decoder = Mlp::glorot(arch.latent_dim, arch.decoder(m), derive_seed(config.rng_seed, 0xD1));
  model.discriminator = Mlp::glorot(arch.latent_dim, arch.scalar_head(), derive_seed(config.rng_seed, 0xC1));
  Adam enc_opt(model.encoder, config.learning_rate);
  Adam dec_opt(model.decoder, config.learning_rate);
  Adam disc_opt(model.discriminator, config.learning_rate);

  Rng rng(config.rng_seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const Eigen::Index batch = std::min<Eigen::Index>(config.batch_size, n);

  ExplicitTrainResult result;
  Eigen::MatrixXd xb, yb;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index len = std::min(batch, n - start);
      xb.resize(m, len);
      yb.resize(1, len);
      for (Eigen::Index c = 0; c < len; ++c) {
        const auto src = order[static_cast<std::size_t>(start + c)];
        xb.col(c) = x.col(src);
        yb(0, c) = y(0, src);
      }
      const ForwardTrace enc = model.encoder.trace(xb);
      const ForwardTrace dec = model.decoder.trace(enc.output());
      const ForwardTrace disc = model.discriminator.trace(enc.output());

      const Eigen::MatrixXd recon_resid = dec.output() - xb;
      const Eigen::MatrixXd prop_resid = disc.output() - yb;
      const double recon_scale = 1.0 / (static_cast<double>(m) * static_cast<double>(len));
      const double prop_scale = 1.0 / static_cast<double>(len);
      const double loss = recon_resid.squaredNorm() * recon_scale + prop_resid.squaredNorm() * prop_scale;
      if (!std::isfinite(loss))
        throw NonFiniteError("non-finite explicit-guidance loss at epoch " + std::to_string(epoch));
      epoch_loss += loss * static_cast<double>(len);

      Eigen::MatrixXd dz_dec, dz_disc;
      const MlpGradients g_dec = model.decoder.backward(dec, 2.0 * recon_scale * recon_resid, &dz_dec);
      const MlpGradients g_disc = model.discriminator.backward(disc, 2.0 * prop_scale * prop_resid, &dz_disc);
      const MlpGradients g_enc = model.encoder.backward(enc, dz_dec + dz_disc);
      dec_opt.step(model.decoder, g_dec);
      disc_opt.step(model.discriminator, g_disc);
      enc_opt.step(model.encoder, g_enc);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(n));
  }
  model.latent_scaler = Standardizer::fit(model.encoder.forward_batch(x).transpose());
  result.model = std::move(model);
  return result;
}

void GuidanceConfig::validate() const {
  if (!(step_size >= 0.0) || !std::isfinite(step_size)) throw ConfigError("guidance.step_size: must be >= 0");
  if (n_steps < 0) throw ConfigError("guidance.n_steps: must be >= 0");
}

Trajectory guide(const ExplicitGuidanceModel& model, const Eigen::VectorXd& seed, const GuidanceConfig& config,
                 const PropertyOracle& oracle) {
  config.validate();
  if (seed.size() != model.design_scaler.dim())
    throw DimensionError(dimension_message("seed", model.design_scaler.dim(), seed.size()));
  Trajectory traj;
  auto record = [&](const Eigen::VectorXd& z, int step) {
    Eigen::VectorXd x = model.decode(z);
    if (oracle) traj.property_values.push_back(oracle(x));
    traj.states.push_back(std::move(x));
    traj.steps.push_back(step);
  };
  const Standardizer& ls = model.latent_scaler;
  if (ls.dim() != model.latent_dim()) throw DimensionError(dimension_message("latent scaler", model.latent_dim(), ls.dim()));
  Eigen::VectorXd z = model.encode(seed);
  Eigen::VectorXd u = ls.transform(z);
  record(z, 0);
  for (int t = 1; t <= config.n_steps; ++t) {
    u += config.step_size * ls.scale.cwiseProduct(model.latent_gradient(z));
    z = ls.inverse(u);
    if (!z.allFinite()) {
      traj.diagnostic = "non-finite latent at step " + std::to_string(t);
      break;
    }
    traj.steps_taken = t;
    record(z, t);
  }
  return traj;
}

}  // namespace propen
