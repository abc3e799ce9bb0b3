#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "propen/matching.hpp"
#include "propen/neural.hpp"

namespace propen {

/// Per-coordinate affine standardization (x - mean) / scale.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  // Scale is the population std, floored at min_scale for constant columns.
  static Standardizer fit(const Eigen::MatrixXd& rows, double min_scale = 1e-6);
  static Standardizer identity(Eigen::Index dim);

  Eigen::Index dim() const { return mean.size(); }
  Eigen::VectorXd transform(const Eigen::VectorXd& x) const;
  Eigen::VectorXd inverse(const Eigen::VectorXd& z) const;
};

/// Hidden widths of the encoder; the decoder mirrors them around a linear
/// bottleneck of latent_dim units.
struct ArchSpec {
  std::vector<int> hidden_widths{30, 30};
  int latent_dim = 15;

  void validate() const;
  // in -> hidden (ReLU) -> latent (identity) -> reversed hidden (ReLU) -> out (identity)
  std::vector<LayerSpec> encoder_decoder(int output_dim) const;
  std::vector<LayerSpec> encoder() const;
  std::vector<LayerSpec> decoder(int output_dim) const;
  // Same hidden widths as the encoder with a scalar head.
  std::vector<LayerSpec> scalar_head() const;
};

enum class IoMode { X2X, XY2XY };

struct PropEnVariant {
  IoMode io_mode = IoMode::X2X;
  double mix_beta = 0.0;  // 0 = plain matched reconstruction

  // "propen_x2x", "propen_mix_xy2xy", ...
  std::string name() const;
};

struct PropEnModel {
  Mlp network;  // operates in standardized coordinates
  PropEnVariant variant;
  Standardizer design_scaler;
  // XY2XY only: property standardization and the standardized training range
  // that seed properties are clamped to.
  double property_mean = 0.0;
  double property_scale = 1.0;
  double property_min = 0.0;
  double property_max = 0.0;

  Eigen::Index design_dim() const { return design_scaler.dim(); }
};

struct PropEnTrainResult {
  PropEnModel model;
  std::vector<double> loss_history;
};

// Trains f on (x -> x') for every matched pair, with the optional
// mix_beta * MSE(f(x), x) term. config.mix_beta is replaced by variant.mix_beta.
// Throws EmptyMatchError on an empty matched dataset.
PropEnTrainResult train_propen(const MatchedDataset& matched, const PropEnVariant& variant,
                               const ArchSpec& arch, TrainConfig config);

// Closed-form per-seed minimizer of the regularized matched reconstruction
// objective: (mean of matched targets + beta * x) / (1 + beta).
Eigen::VectorXd tabular_minimizer(const MatchedDataset& matched, Eigen::Index seed_index, double beta);

struct OptimizeConfig {
  int max_steps = 30;
  double convergence_eps = 1e-4;
  bool record_all = true;

  void validate() const;
};

using PropertyOracle = std::function<double(const Eigen::VectorXd&)>;

struct Trajectory {
  std::vector<Eigen::VectorXd> states;  // states[0] is the starting design
  std::vector<int> steps;               // iteration index of each recorded state
  std::vector<double> property_values;  // per state, empty without an oracle
  bool converged = false;
  int steps_taken = 0;
  std::string diagnostic;  // set when iteration aborted on a non-finite state

  const Eigen::VectorXd& final_state() const { return states.back(); }
  bool aborted() const { return !diagnostic.empty(); }
};

// Iterates x_t = f(x_{t-1}) from the seed until ||x_t - x_{t-1}|| < eps or
// max_steps. XY2XY models need the seed's property: seed_property if given,
// otherwise the oracle's value.
Trajectory optimize(const PropEnModel& model, const Eigen::VectorXd& seed, const OptimizeConfig& config,
                    const PropertyOracle& oracle = {}, std::optional<double> seed_property = std::nullopt);

// Header "[method,]seed_id,step,x0..x{m-1},property"; the method column is
// written only when method is non-empty. Property is blank without an oracle.
void write_trajectory_csv_header(std::ostream& out, Eigen::Index dim, bool with_method);
void write_trajectory_csv_rows(std::ostream& out, const Trajectory& trajectory, long seed_id,
                               const std::string& method = {});

// Model file: the network in PRPN format followed by a "PRPS" block with the
// variant and the scalers.
void write_propen_model(std::ostream& out, const PropEnModel& model);
PropEnModel read_propen_model(std::istream& in);

}  // namespace propen
