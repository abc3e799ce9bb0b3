#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace propen {

enum class Activation : std::uint32_t { Identity = 0, ReLU = 1 };

struct DenseLayer {
  Eigen::MatrixXd weights;  // out_dim x in_dim
  Eigen::VectorXd biases;   // out_dim
  Activation activation = Activation::Identity;

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }
};

struct LayerSpec {
  int width = 0;
  Activation activation = Activation::ReLU;
};

// Per-parameter gradients, laid out exactly like the layers of the Mlp they
// were computed for.
struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  // Concatenation in Mlp::flat_parameters() order.
  Eigen::VectorXd flatten() const;
};

// Post-activation values of every layer for a batch (one sample per column).
// activations[0] is the input, activations.back() the network output.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> activations;
  const Eigen::MatrixXd& output() const { return activations.back(); }
};

/// Dense feed-forward network with ReLU / identity layers.
///
/// Batched entry points take one sample per column. Const member functions
/// are safe to call concurrently on a shared instance.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  // Glorot-uniform weights, zero biases.
  static Mlp glorot(int input_dim, std::span<const LayerSpec> layers, std::uint64_t seed);

  int input_dim() const;
  int output_dim() const;
  bool empty() const { return layers_.empty(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  DenseLayer& layer(std::size_t k) { return layers_.at(k); }

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;
  ForwardTrace trace(const Eigen::MatrixXd& inputs) const;

  // Backpropagates d(loss)/d(output) through a trace produced by this model.
  // When input_grad is non-null it receives d(loss)/d(input).
  MlpGradients backward(const ForwardTrace& trace, const Eigen::MatrixXd& output_grad,
                        Eigen::MatrixXd* input_grad = nullptr) const;

  // Gradient of a scalar-output network with respect to its input.
  Eigen::VectorXd input_gradient(const Eigen::VectorXd& input) const;

  std::size_t parameter_count() const;
  Eigen::VectorXd flat_parameters() const;
  void set_flat_parameters(const Eigen::VectorXd& flat);
  bool all_finite() const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  std::vector<DenseLayer> layers_;
};

struct TrainConfig {
  int epochs = 500;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t rng_seed = 0;
  double mix_beta = 0.0;  // weight of the reconstruction regularizer; 0 disables it

  void validate() const;
};

struct LossAndGradients {
  double loss = 0.0;
  MlpGradients gradients;
};

// loss = MSE(f(input), target) + mix_beta * MSE(f(input), mix_target), with
// MSE averaged over output coordinates.
LossAndGradients loss_and_gradients(const Mlp& model, const Eigen::VectorXd& input,
                                    const Eigen::VectorXd& target,
                                    const std::optional<Eigen::VectorXd>& mix_target,
                                    double mix_beta);

// Batch version: mean of the per-sample loss over the columns. mix_targets
// may be null when mix_beta == 0.
LossAndGradients batch_loss_and_gradients(const Mlp& model, const Eigen::MatrixXd& inputs,
                                          const Eigen::MatrixXd& targets,
                                          const Eigen::MatrixXd* mix_targets, double mix_beta);

// Training triples, one per column. mix_targets is left empty when unused.
struct TrainingPairs {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
  Eigen::MatrixXd mix_targets;

  Eigen::Index size() const { return inputs.cols(); }
};

struct TrainResult {
  Mlp model;
  std::vector<double> loss_history;  // mean per-sample loss of each epoch
};

class Adam {
 public:
  explicit Adam(const Mlp& model, double learning_rate, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);
  void step(Mlp& model, const MlpGradients& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  MlpGradients m_, v_;
};

// Minibatch Adam on the pairs, reshuffled every epoch with config.rng_seed.
// Throws NonFiniteError if the loss stops being finite.
TrainResult train(Mlp model, const TrainingPairs& pairs, const TrainConfig& config);

// Flat binary format: "PRPN", u32 version, u32 layer count, per layer
// (u32 in, u32 out, u32 activation), then per layer row-major weights
// followed by biases, all f64 little-endian.
void write_mlp(std::ostream& out, const Mlp& model);
Mlp read_mlp(std::istream& in);

}  // namespace propen
