#include "propen/neural.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include "binary_io.hpp"
#include "propen/error.hpp"
#include "propen/rng.hpp"

namespace propen {

namespace {

constexpr char kMagic[4] = {'P', 'R', 'P', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

void apply_activation(Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::ReLU) z = z.cwiseMax(0.0);
}

}  // namespace

Eigen::VectorXd MlpGradients::flatten() const {
  Eigen::Index total = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) total += weights[k].size() + biases[k].size();
  Eigen::VectorXd flat(total);
  Eigen::Index pos = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const auto& w = weights[k];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat[pos++] = w(r, c);
    flat.segment(pos, biases[k].size()) = biases[k];
    pos += biases[k].size();
  }
  return flat;
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.biases.size() != l.out_dim())
      throw DimensionError(dimension_message("layer biases", l.out_dim(), l.biases.size()));
    if (l.in_dim() <= 0 || l.out_dim() <= 0) throw InvalidArgument("layer dimensions must be positive");
    if (k > 0 && layers_[k - 1].out_dim() != l.in_dim())
      throw DimensionError(dimension_message("layer input", layers_[k - 1].out_dim(), l.in_dim()));
  }
  if (!all_finite()) throw NonFiniteError("Mlp parameters must be finite");
}

Mlp Mlp::glorot(int input_dim, std::span<const LayerSpec> specs, std::uint64_t seed) {
  if (input_dim <= 0) throw InvalidArgument("input_dim must be positive");
  if (specs.empty()) throw InvalidArgument("an Mlp needs at least one layer");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  int fan_in = input_dim;
  for (const auto& spec : specs) {
    if (spec.width <= 0) throw InvalidArgument("layer width must be positive");
    DenseLayer layer;
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + spec.width));
    layer.weights.resize(spec.width, fan_in);
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = rng.uniform(-a, a);
    layer.biases = Eigen::VectorXd::Zero(spec.width);
    layer.activation = spec.activation;
    layers.push_back(std::move(layer));
    fan_in = spec.width;
  }
  return Mlp(std::move(layers));
}

int Mlp::input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().in_dim()); }
int Mlp::output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().out_dim()); }

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
  return forward_batch(input);
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_dim())
    throw DimensionError(dimension_message("Mlp input", input_dim(), inputs.rows()));
  Eigen::MatrixXd a = inputs;
  for (const auto& l : layers_) {
    Eigen::MatrixXd z = l.weights * a;
    z.colwise() += l.biases;
    apply_activation(z, l.activation);
    a = std::move(z);
  }
  return a;
}

ForwardTrace Mlp::trace(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != input_dim())
    throw DimensionError(dimension_message("Mlp input", input_dim(), inputs.rows()));
  ForwardTrace t;
  t.activations.reserve(layers_.size() + 1);
  t.activations.push_back(inputs);
  for (const auto& l : layers_) {
    Eigen::MatrixXd z = l.weights * t.activations.back();
    z.colwise() += l.biases;
    apply_activation(z, l.activation);
    t.activations.push_back(std::move(z));
  }
  return t;
}

MlpGradients Mlp::backward(const ForwardTrace& trace, const Eigen::MatrixXd& output_grad,
                           Eigen::MatrixXd* input_grad) const {
  if (trace.activations.size() != layers_.size() + 1)
    throw InvalidArgument("forward trace does not belong to this model");
  if (output_grad.rows() != output_dim() || output_grad.cols() != trace.output().cols())
    throw DimensionError(dimension_message("output gradient rows", output_dim(), output_grad.rows()));

  MlpGradients g;
  g.weights.resize(layers_.size());
  g.biases.resize(layers_.size());
  Eigen::MatrixXd delta = output_grad;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    if (l.activation == Activation::ReLU)
      delta = (trace.activations[k + 1].array() > 0.0).select(delta.array(), 0.0).matrix();
    g.weights[k].noalias() = delta * trace.activations[k].transpose();
    g.biases[k] = delta.rowwise().sum();
    if (k > 0 || input_grad != nullptr) {
      Eigen::MatrixXd prev = l.weights.transpose() * delta;
      delta = std::move(prev);
    }
  }
  if (input_grad != nullptr) *input_grad = std::move(delta);
  return g;
}

Eigen::VectorXd Mlp::input_gradient(const Eigen::VectorXd& input) const {
  if (output_dim() != 1) throw InvalidArgument("input_gradient requires a scalar-output network");
  const ForwardTrace t = trace(input);
  Eigen::MatrixXd dx;
  backward(t, Eigen::MatrixXd::Ones(1, 1), &dx);
  return dx.col(0);
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.biases.size());
  return n;
}

Eigen::VectorXd Mlp::flat_parameters() const {
  MlpGradients view;
  for (const auto& l : layers_) {
    view.weights.push_back(l.weights);
    view.biases.push_back(l.biases);
  }
  return view.flatten();
}

void Mlp::set_flat_parameters(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count())
    throw DimensionError(dimension_message("flat parameters", static_cast<long>(parameter_count()), flat.size()));
  Eigen::Index pos = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = flat[pos++];
    l.biases = flat.segment(pos, l.biases.size());
    pos += l.biases.size();
  }
}

bool Mlp::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const DenseLayer& l) {
    return l.weights.allFinite() && l.biases.allFinite();
  });
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t k = 0; k < a.layers_.size(); ++k) {
    const auto& x = a.layers_[k];
    const auto& y = b.layers_[k];
    if (x.activation != y.activation || x.weights.rows() != y.weights.rows() ||
        x.weights.cols() != y.weights.cols() || x.weights != y.weights || x.biases != y.biases)
      return false;
  }
  return true;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs: must be a positive integer");
  if (batch_size < 1) throw ConfigError("train.batch_size: must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("train.learning_rate: must be > 0");
  if (!(mix_beta >= 0.0) || !std::isfinite(mix_beta)) throw ConfigError("train.mix_beta: must be >= 0");
}

LossAndGradients batch_loss_and_gradients(const Mlp& model, const Eigen::MatrixXd& inputs,
                                          const Eigen::MatrixXd& targets,
                                          const Eigen::MatrixXd* mix_targets, double mix_beta) {
  const Eigen::Index out = model.output_dim();
  if (targets.rows() != out) throw DimensionError(dimension_message("target", out, targets.rows()));
  if (targets.cols() != inputs.cols())
    throw DimensionError(dimension_message("target count", inputs.cols(), targets.cols()));
  if (mix_beta < 0.0) throw InvalidArgument("mix_beta must be nonnegative");
  const bool use_mix = mix_beta > 0.0;
  if (use_mix) {
    if (mix_targets == nullptr || mix_targets->size() == 0)
      throw InvalidArgument("mix_beta > 0 requires a mix target");
    if (mix_targets->rows() != out)
      throw DimensionError(dimension_message("mix target", out, mix_targets->rows()));
    if (mix_targets->cols() != inputs.cols())
      throw DimensionError(dimension_message("mix target count", inputs.cols(), mix_targets->cols()));
  }

  const ForwardTrace t = model.trace(inputs);
  const Eigen::MatrixXd& pred = t.output();
  const double scale = 1.0 / (static_cast<double>(out) * static_cast<double>(inputs.cols()));

  Eigen::MatrixXd resid = pred - targets;
  double loss = resid.squaredNorm();
  Eigen::MatrixXd grad = resid;
  if (use_mix) {
    Eigen::MatrixXd mix_resid = pred - *mix_targets;
    loss += mix_beta * mix_resid.squaredNorm();
    grad += mix_beta * mix_resid;
  }
  grad *= 2.0 * scale;

  LossAndGradients result;
  result.loss = loss * scale;
  result.gradients = model.backward(t, grad);
  return result;
}

LossAndGradients loss_and_gradients(const Mlp& model, const Eigen::VectorXd& input,
                                    const Eigen::VectorXd& target,
                                    const std::optional<Eigen::VectorXd>& mix_target,
                                    double mix_beta) {
  if (mix_beta > 0.0 && !mix_target) throw InvalidArgument("mix_beta > 0 requires a mix target");
  const Eigen::MatrixXd mix = mix_target ? Eigen::MatrixXd(*mix_target) : Eigen::MatrixXd();
  return batch_loss_and_gradients(model, input, target, mix_target ? &mix : nullptr, mix_beta);
}

Adam::Adam(const Mlp& model, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& l : model.layers()) {
    m_.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    m_.biases.push_back(Eigen::VectorXd::Zero(l.biases.size()));
  }
  v_ = m_;
}

void Adam::step(Mlp& model, const MlpGradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step = lr_ * std::sqrt(c2) / c1;
  const double eps_hat = eps_ * std::sqrt(c2);
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseAbs2();
    param.array() -= step * m.array() / (v.array().sqrt() + eps_hat);
  };
  for (std::size_t k = 0; k < grads.weights.size(); ++k) {
    auto& layer = model.layer(k);
    update(layer.weights, m_.weights[k], v_.weights[k], grads.weights[k]);
    update(layer.biases, m_.biases[k], v_.biases[k], grads.biases[k]);
  }
}

TrainResult train(Mlp model, const TrainingPairs& pairs, const TrainConfig& config) {
  config.validate();
  const Eigen::Index n = pairs.size();
  if (n == 0) throw InvalidArgument("training set is empty");
  if (pairs.inputs.rows() != model.input_dim())
    throw DimensionError(dimension_message("training input", model.input_dim(), pairs.inputs.rows()));
  if (pairs.targets.rows() != model.output_dim() || pairs.targets.cols() != n)
    throw DimensionError(dimension_message("training target", model.output_dim(), pairs.targets.rows()));
  const bool use_mix = config.mix_beta > 0.0;
  if (use_mix && (pairs.mix_targets.rows() != model.output_dim() || pairs.mix_targets.cols() != n))
    throw DimensionError("mix_beta > 0 requires one mix target per training pair");

  Rng rng(config.rng_seed);
  Adam adam(model, config.learning_rate);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  TrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(config.epochs));
  const Eigen::Index batch = std::min<Eigen::Index>(config.batch_size, n);
  Eigen::MatrixXd xb, tb, mb;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double epoch_loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index len = std::min(batch, n - start);
      xb.resize(pairs.inputs.rows(), len);
      tb.resize(pairs.targets.rows(), len);
      if (use_mix) mb.resize(pairs.mix_targets.rows(), len);
      for (Eigen::Index c = 0; c < len; ++c) {
        const Eigen::Index src = order[static_cast<std::size_t>(start + c)];
        xb.col(c) = pairs.inputs.col(src);
        tb.col(c) = pairs.targets.col(src);
        if (use_mix) mb.col(c) = pairs.mix_targets.col(src);
      }
      LossAndGradients lg = batch_loss_and_gradients(model, xb, tb, use_mix ? &mb : nullptr, config.mix_beta);
      if (!std::isfinite(lg.loss))
        throw NonFiniteError("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", batch starting at " + std::to_string(start) +
                             "; try a smaller learning rate");
      epoch_loss += lg.loss * static_cast<double>(len);
      adam.step(model, lg.gradients);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(n));
  }
  if (!model.all_finite()) throw NonFiniteError("training produced non-finite parameters");
  result.model = std::move(model);
  return result;
}

void write_mlp(std::ostream& out, const Mlp& model) {
  out.write(kMagic, 4);
  detail::put_u32(out, kFormatVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& l : model.layers()) {
    detail::put_u32(out, static_cast<std::uint32_t>(l.in_dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(l.out_dim()));
    detail::put_u32(out, static_cast<std::uint32_t>(l.activation));
  }
  for (const auto& l : model.layers()) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) detail::put_f64(out, l.weights(r, c));
    for (Eigen::Index r = 0; r < l.biases.size(); ++r) detail::put_f64(out, l.biases[r]);
  }
  if (!out) throw IoError("failed writing model");
}

Mlp read_mlp(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw IoError("not a PRPN model file");
  const std::uint32_t version = detail::get_u32(in);
  if (version != kFormatVersion) throw IoError("unsupported model format version " + std::to_string(version));
  const std::uint32_t count = detail::get_u32(in);
  if (count == 0 || count > 4096) throw IoError("implausible layer count " + std::to_string(count));
  std::vector<DenseLayer> layers(count);
  for (auto& l : layers) {
    const std::uint32_t in_dim = detail::get_u32(in);
    const std::uint32_t out_dim = detail::get_u32(in);
    const std::uint32_t act = detail::get_u32(in);
    if (act > 1) throw IoError("unknown activation tag " + std::to_string(act));
    if (in_dim == 0 || out_dim == 0 || in_dim > (1u << 20) || out_dim > (1u << 20))
      throw IoError("implausible layer dimensions");
    l.weights.resize(out_dim, in_dim);
    l.biases.resize(out_dim);
    l.activation = static_cast<Activation>(act);
  }
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = detail::get_f64(in);
    for (Eigen::Index r = 0; r < l.biases.size(); ++r) l.biases[r] = detail::get_f64(in);
  }
  try {
    return Mlp(std::move(layers));
  } catch (const Error& e) {
    throw IoError(std::string("corrupt model file: ") + e.what());
  }
}

}  // namespace propen
