#include "propen/propen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "binary_io.hpp"
#include "propen/csv.hpp"
#include "propen/error.hpp"
#include "propen/rng.hpp"

namespace propen {

Standardizer Standardizer::fit(const Eigen::MatrixXd& rows, double min_scale) {
  if (rows.rows() == 0) throw InvalidArgument("cannot fit a standardizer on zero rows");
  Standardizer s;
  s.mean = rows.colwise().mean().transpose();
  s.scale = ((rows.rowwise() - s.mean.transpose()).colwise().squaredNorm() / static_cast<double>(rows.rows()))
                .cwiseSqrt()
                .transpose();
  s.scale = s.scale.cwiseMax(min_scale);
  return s;
}

Standardizer Standardizer::identity(Eigen::Index dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

Eigen::VectorXd Standardizer::transform(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw DimensionError(dimension_message("design", dim(), x.size()));
  return (x - mean).cwiseQuotient(scale);
}

Eigen::VectorXd Standardizer::inverse(const Eigen::VectorXd& z) const {
  if (z.size() != dim()) throw DimensionError(dimension_message("standardized design", dim(), z.size()));
  return z.cwiseProduct(scale) + mean;
}

void ArchSpec::validate() const {
  if (latent_dim < 1) throw ConfigError("arch.latent: must be >= 1");
  for (int w : hidden_widths)
    if (w < 1) throw ConfigError("arch.hidden: widths must be >= 1");
}

std::vector<LayerSpec> ArchSpec::encoder() const {
  std::vector<LayerSpec> out;
  for (int w : hidden_widths) out.push_back({w, Activation::ReLU});
  out.push_back({latent_dim, Activation::Identity});
  return out;
}

std::vector<LayerSpec> ArchSpec::decoder(int output_dim) const {
  std::vector<LayerSpec> out;
  for (auto it = hidden_widths.rbegin(); it != hidden_widths.rend(); ++it) out.push_back({*it, Activation::ReLU});
  out.push_back({output_dim, Activation::Identity});
  return out;
}

std::vector<LayerSpec> ArchSpec::encoder_decoder(int output_dim) const {
  auto out = encoder();
  const auto dec = decoder(output_dim);
  out.insert(out.end(), dec.begin(), dec.end());
  return out;
}

std::vector<LayerSpec> ArchSpec::scalar_head() const {
  std::vector<LayerSpec> out;
  for (int w : hidden_widths) out.push_back({w, Activation::ReLU});
  out.push_back({1, Activation::Identity});
  return out;
}

std::string PropEnVariant::name() const {
  std::string s = "propen_";
  if (mix_beta > 0.0) s += "mix_";
  s += io_mode == IoMode::X2X ? "x2x" : "xy2xy";
  return s;
}

PropEnTrainResult train_propen(const MatchedDataset& matched, const PropEnVariant& variant, const ArchSpec& arch,
                               TrainConfig config) {
  if (!matched.data) throw InvalidArgument("matched dataset has no design set");
  if (matched.empty())
    throw EmptyMatchError("matched dataset is empty; relax the thresholds (increase delta_x or delta_y)");
  arch.validate();
  config.mix_beta = variant.mix_beta;
  config.validate();

  const DesignSet& data = *matched.data;
  const Eigen::Index m = data.dim();
  const bool with_y = variant.io_mode == IoMode::XY2XY;
  const Eigen::Index io_dim = m + (with_y ? 1 : 0);

  PropEnModel model;
  model.variant = variant;
  model.design_scaler = Standardizer::fit(data.designs);
  Eigen::VectorXd ystd;
  if (with_y) {
    const Standardizer ys = Standardizer::fit(data.properties);
    model.property_mean = ys.mean[0];
    model.property_scale = ys.scale[0];
    ystd = (data.properties.array() - model.property_mean) / model.property_scale;
    model.property_min = ystd.minCoeff();
    model.property_max = ystd.maxCoeff();
  }

  Eigen::MatrixXd xstd(m, data.size());
  for (Eigen::Index i = 0; i < data.size(); ++i) xstd.col(i) = model.design_scaler.transform(data.design(i));

  TrainingPairs pairs;
  const auto n_pairs = static_cast<Eigen::Index>(matched.size());
  pairs.inputs.resize(io_dim, n_pairs);
  pairs.targets.resize(io_dim, n_pairs);
  for (Eigen::Index k = 0; k < n_pairs; ++k) {
    const auto& p = matched.pairs[static_cast<std::size_t>(k)];
    pairs.inputs.col(k).head(m) = xstd.col(p.source);
    pairs.targets.col(k).head(m) = xstd.col(p.target);
    if (with_y) {
      pairs.inputs(m, k) = ystd[p.source];
      pairs.targets(m, k) = ystd[p.target];
    }
  }
  if (config.mix_beta > 0.0) pairs.mix_targets = pairs.inputs;

  const auto layers = arch.encoder_decoder(static_cast<int>(io_dim));
  Mlp net = Mlp::glorot(static_cast<int>(io_dim), layers, derive_seed(config.rng_seed, 0x70));
  TrainResult trained = train(std::move(net), pairs, config);
  model.network = std::move(trained.model);
  return {std::move(model), std::move(trained.loss_history)};
}

Eigen::VectorXd tabular_minimizer(const MatchedDataset& matched, Eigen::Index seed_index, double beta) {
  if (!(beta >= 0.0)) throw InvalidArgument("beta must be nonnegative");
  const Eigen::MatrixXd targets = matches_of(matched, seed_index);
  if (targets.rows() == 0) throw InvalidArgument("seed " + std::to_string(seed_index) + " has no matches");
  const Eigen::VectorXd mean = targets.colwise().mean().transpose();
  return (mean + beta * matched.data->design(seed_index)) / (1.0 + beta);
}

void OptimizeConfig::validate() const {
  if (max_steps < 1) throw ConfigError("optimize.max_steps: must be >= 1");
  if (!(convergence_eps > 0.0)) throw ConfigError("optimize.convergence_eps: must be > 0");
}

Trajectory optimize(const PropEnModel& model, const Eigen::VectorXd& seed, const OptimizeConfig& config,
                    const PropertyOracle& oracle, std::optional<double> seed_property) {
  config.validate();
  const Eigen::Index m = model.design_dim();
  const bool with_y = model.variant.io_mode == IoMode::XY2XY;
  if (seed.size() != m) throw DimensionError(dimension_message("seed", m, seed.size()));
  if (model.network.input_dim() != m + (with_y ? 1 : 0))
    throw DimensionError(dimension_message("model input", m + (with_y ? 1 : 0), model.network.input_dim()));

  Trajectory traj;
  auto record = [&](const Eigen::VectorXd& x, int step) {
    traj.states.push_back(x);
    traj.steps.push_back(step);
    if (oracle) traj.property_values.push_back(oracle(x));
  };
  record(seed, 0);

  double y_std = 0.0;
  if (with_y) {
    double y0;
    if (seed_property) y0 = *seed_property;
    else if (oracle) y0 = traj.property_values.front();
    else throw InvalidArgument("xy2xy optimization needs the seed's property value");
    y_std = std::clamp((y0 - model.property_mean) / model.property_scale, model.property_min, model.property_max);
  }

  Eigen::VectorXd x = seed;
  Eigen::VectorXd input(model.network.input_dim());
  for (int t = 1; t <= config.max_steps; ++t) {
    input.head(m) = model.design_scaler.transform(x);
    if (with_y) input[m] = y_std;
    const Eigen::VectorXd out = model.network.forward(input);
    Eigen::VectorXd next = model.design_scaler.inverse(out.head(m));
    if (!next.allFinite() || (with_y && !std::isfinite(out[m]))) {
      traj.diagnostic = "non-finite state at step " + std::to_string(t);
      break;
    }
    if (with_y) y_std = out[m];
    const double step = (next - x).norm();
    x = std::move(next);
    traj.steps_taken = t;
    if (config.record_all) record(x, t);
    if (step < config.convergence_eps) {
      traj.converged = true;
      break;
    }
  }
  if (!config.record_all && traj.steps_taken > 0) record(x, traj.steps_taken);
  return traj;
}

void write_trajectory_csv_header(std::ostream& out, Eigen::Index dim, bool with_method) {
  if (with_method) out << "method,";
  out << "seed_id,step";
  for (Eigen::Index c = 0; c < dim; ++c) out << ",x" << c;
  out << ",property\n";
}

void write_trajectory_csv_rows(std::ostream& out, const Trajectory& trajectory, long seed_id,
                               const std::string& method) {
  for (std::size_t k = 0; k < trajectory.states.size(); ++k) {
    if (!method.empty()) out << method << ',';
    out << seed_id << ',' << trajectory.steps[k];
    for (Eigen::Index c = 0; c < trajectory.states[k].size(); ++c) out << ',' << csv::format(trajectory.states[k][c]);
    out << ',';
    if (k < trajectory.property_values.size()) out << csv::format(trajectory.property_values[k]);
    out << '\n';
  }
}

namespace {
constexpr char kScalerMagic[4] = {'P', 'R', 'P', 'S'};
}

void write_propen_model(std::ostream& out, const PropEnModel& model) {
  write_mlp(out, model.network);
  out.write(kScalerMagic, 4);
  detail::put_u32(out, 1);
  detail::put_u32(out, model.variant.io_mode == IoMode::X2X ? 0u : 1u);
  detail::put_f64(out, model.variant.mix_beta);
  detail::put_u32(out, static_cast<std::uint32_t>(model.design_dim()));
  for (Eigen::Index i = 0; i < model.design_dim(); ++i) detail::put_f64(out, model.design_scaler.mean[i]);
  for (Eigen::Index i = 0; i < model.design_dim(); ++i) detail::put_f64(out, model.design_scaler.scale[i]);
  detail::put_f64(out, model.property_mean);
  detail::put_f64(out, model.property_scale);
  detail::put_f64(out, model.property_min);
  detail::put_f64(out, model.property_max);
  if (!out) throw IoError("failed writing model");
}

PropEnModel read_propen_model(std::istream& in) {
  PropEnModel model;
  model.network = read_mlp(in);
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kScalerMagic))
    throw IoError("model file lacks the PRPS scaler block");
  if (detail::get_u32(in) != 1) throw IoError("unsupported scaler block version");
  const std::uint32_t mode = detail::get_u32(in);
  if (mode > 1) throw IoError("unknown io mode tag");
  model.variant.io_mode = mode == 0 ? IoMode::X2X : IoMode::XY2XY;
  model.variant.mix_beta = detail::get_f64(in);
  const std::uint32_t dim = detail::get_u32(in);
  if (dim == 0 || dim > (1u << 20)) throw IoError("implausible design dimension");
  model.design_scaler.mean.resize(dim);
  model.design_scaler.scale.resize(dim);
  for (std::uint32_t i = 0; i < dim; ++i) model.design_scaler.mean[i] = detail::get_f64(in);
  for (std::uint32_t i = 0; i < dim; ++i) model.design_scaler.scale[i] = detail::get_f64(in);
  model.property_mean = detail::get_f64(in);
  model.property_scale = detail::get_f64(in);
  model.property_min = detail::get_f64(in);
  model.property_max = detail::get_f64(in);
  const auto io = static_cast<int>(dim) + (model.variant.io_mode == IoMode::XY2XY ? 1 : 0);
  if (model.network.input_dim() != io || model.network.output_dim() != io)
    throw IoError("model network dimensions do not match its scaler block");
  return model;
}

}  // namespace propen
