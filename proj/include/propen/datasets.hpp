#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <variant>

#include <Eigen/Dense>

#include "propen/design_set.hpp"

namespace propen {

// ---------------------------------------------------------------------------
// Toy distributions
// ---------------------------------------------------------------------------

enum class ToyFamily { Pinwheel, EightGaussians };

struct ToyConfig {
  ToyFamily family = ToyFamily::EightGaussians;
  int n_samples = 200;
  double noise_scale = 0.1;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// 2-dim points, properties zero.
//   EightGaussians: 8 modes evenly spaced on a circle of radius 2, isotropic
//     std noise_scale per mode.
//   Pinwheel: 5 arms, radial std 3*noise_scale and tangential std noise_scale
//     around radius 1, warped by angle 0.25*exp(radial), scaled by 2.
DesignSet generate_toy(const ToyConfig& config);

/// Linear isometry R^2 -> R^d given by a d x 2 matrix with orthonormal columns.
class Embedding {
 public:
  explicit Embedding(Eigen::MatrixXd matrix);  // throws unless columns orthonormal (1e-10)
  static Embedding identity();
  static Embedding random(int target_dim, std::uint64_t seed);

  int target_dim() const { return static_cast<int>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }

 private:
  Eigen::MatrixXd matrix_;
};

DesignSet embed(const DesignSet& points, const Embedding& embedding);

/// Isotropic Gaussian kernel density estimate
///   p(x) = (1/n) sum_i N(x; c_i, sigma^2 I)
/// with full normalization. Log-space evaluation never overflows.
class KdeModel {
 public:
  KdeModel(Eigen::MatrixXd centers, double bandwidth);

  Eigen::Index dim() const { return centers_.cols(); }
  Eigen::Index size() const { return centers_.rows(); }
  double bandwidth() const { return bandwidth_; }
  const Eigen::MatrixXd& centers() const { return centers_; }

  double log_density(const Eigen::VectorXd& x) const;
  double density(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd density_hessian(const Eigen::VectorXd& x) const;

  // log_density of every row.
  Eigen::VectorXd log_density_rows(const Eigen::MatrixXd& rows) const;

 private:
  void check_dim(const Eigen::VectorXd& x) const;
  // log N(x; c_i, sigma^2 I) for every center.
  Eigen::VectorXd log_kernels(const Eigen::VectorXd& x) const;

  Eigen::MatrixXd centers_;
  double bandwidth_;
  double log_norm_;
};

// ---------------------------------------------------------------------------
// NACA 4-digit airfoils
// ---------------------------------------------------------------------------

struct NacaParams {
  double m_camber = 0.0;  // M, max camber / chord, [0, 0.09]
  double p_pos = 0.4;     // P, chordwise position of max camber, [0.1, 0.9]
  double t_thick = 0.12;  // T, max thickness / chord, [0.01, 0.40] (0 allowed for the camber line)
  int n_points = 200;     // coordinate pairs, positive and even
  // Uses -0.1036 for the x^4 thickness coefficient instead of -0.1015 so the
  // surfaces meet at x = 1.
  bool closed_trailing_edge = true;

  void validate() const;
};

// y_t(x) = 5T(0.2969 sqrt(x) - 0.1260x - 0.3516x^2 + 0.2843x^3 - c4 x^4)
double naca_half_thickness(double x, double t_thick, bool closed_trailing_edge);
double naca_camber(double x, double m_camber, double p_pos);
double naca_camber_slope(double x, double m_camber, double p_pos);

// Flattened (x0, y0, x1, y1, ...) of n_points coordinates: trailing edge ->
// upper surface -> leading edge -> lower surface -> trailing edge, each
// surface on the same n_points/2 cosine-spaced chord stations.
Eigen::VectorXd generate_naca(const NacaParams& params);

struct AirfoilRanges {
  double m_lo = 0.0, m_hi = 0.06;
  double p_lo = 0.2, p_hi = 0.7;
  double t_lo = 0.06, t_hi = 0.18;
};

struct AirfoilDataset {
  DesignSet designs;                // properties zero
  std::vector<NacaParams> params;   // generating parameters, per row
};

AirfoilDataset generate_airfoil_dataset(int n_shapes, std::uint64_t seed, int n_points = 200,
                                        const AirfoilRanges& ranges = {});

// Least-squares recovery of (M, P, T) from a flattened coordinate vector.
NacaParams fit_naca_params(const Eigen::VectorXd& coords);

// Smooth lift-to-drag-like surrogate of (M, P, T), used when no external
// aerodynamic evaluator is available.
double synthetic_lift_to_drag(const NacaParams& params);
double synthetic_airfoil_property(const Eigen::VectorXd& coords);

// Two-column "x,y" CSV of one shape.
void write_airfoil_csv(std::ostream& out, const Eigen::VectorXd& coords);

// ---------------------------------------------------------------------------
// Analytic test properties with known gradients
// ---------------------------------------------------------------------------

struct LinearProperty {
  Eigen::VectorXd w;  // g(x) = w . x
};

struct QuadraticProperty {
  Eigen::MatrixXd a;  // positive semidefinite
  Eigen::VectorXd b;  // g(x) = -(x - b)^T A (x - b)
};

using AnalyticProperty = std::variant<LinearProperty, QuadraticProperty>;

struct PropertyValue {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

PropertyValue analytic_property(const AnalyticProperty& kind, const Eigen::VectorXd& x);

}  // namespace propen
