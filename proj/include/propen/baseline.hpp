#pragma once

#include <Eigen/Dense>

#include "propen/design_set.hpp"
#include "propen/neural.hpp"
#include "propen/propen.hpp"

namespace propen {

/// Autoencoder plus a latent-space property regressor ("discriminator").
/// All three networks work on standardized designs / properties.
struct ExplicitGuidanceModel {
  Mlp encoder;
  Mlp decoder;
  Mlp discriminator;  // latent -> standardized property
  Standardizer design_scaler;
  // Per-coordinate statistics of the encoded training set; guidance steps
  // are taken in these standardized latent units.
  Standardizer latent_scaler;
  double property_mean = 0.0;
  double property_scale = 1.0;

  int latent_dim() const { return encoder.output_dim(); }
  Eigen::VectorXd encode(const Eigen::VectorXd& design) const;
  Eigen::VectorXd decode(const Eigen::VectorXd& latent) const;
  // Predicted property in original units.
  double predict(const Eigen::VectorXd& latent) const;
  // Gradient of the discriminator output with respect to the latent.
  Eigen::VectorXd latent_gradient(const Eigen::VectorXd& latent) const;
};

struct ExplicitTrainResult {
  ExplicitGuidanceModel model;
  std::vector<double> loss_history;  // reconstruction + property MSE per epoch
};

// Joint minimization of MSE(decode(encode(x)), x) + MSE(disc(encode(x)), y).
// config.mix_beta is ignored.
ExplicitTrainResult train_explicit(const DesignSet& data, const ArchSpec& arch, const TrainConfig& config);

struct GuidanceConfig {
  double step_size = 0.01;
  int n_steps = 30;

  void validate() const;
};

// u_0 = standardized encode(seed), u_{t+1} = u_t + step_size * grad_u disc(z(u_t)),
// i.e. gradient ascent on the discriminator in standardized latent units. The recorded
// states are the decoded latents, so states[0] is the reconstruction of the
// seed rather than the seed itself.
Trajectory guide(const ExplicitGuidanceModel& model, const Eigen::VectorXd& seed, const GuidanceConfig& config,
                 const PropertyOracle& oracle = {});

}  // namespace propen
