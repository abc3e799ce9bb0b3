#include "propen/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "propen/csv.hpp"
#include "propen/error.hpp"
#include "propen/rng.hpp"

namespace propen {

void ToyConfig::validate() const {
  if (n_samples < 1) throw ConfigError("dataset.n: must be >= 1");
  if (!(noise_scale > 0.0) || !std::isfinite(noise_scale)) throw ConfigError("dataset.noise: must be > 0");
}

DesignSet generate_toy(const ToyConfig& config) {
  config.validate();
  Rng rng(config.rng_seed);
  DesignSet out;
  out.designs.resize(config.n_samples, 2);
  out.properties = Eigen::VectorXd::Zero(config.n_samples);

  if (config.family == ToyFamily::EightGaussians) {
    constexpr double kRadius = 2.0;
    for (int i = 0; i < config.n_samples; ++i) {
      const auto mode = static_cast<double>(rng.below(8));
      const double angle = 2.0 * std::numbers::pi * mode / 8.0;
      out.designs(i, 0) = kRadius * std::cos(angle) + config.noise_scale * rng.normal();
      out.designs(i, 1) = kRadius * std::sin(angle) + config.noise_scale * rng.normal();
    }
  } else {
    constexpr int kArms = 5;
    constexpr double kRate = 0.25;
    constexpr double kScale = 2.0;
    const double radial_std = 3.0 * config.noise_scale;
    const double tangential_std = config.noise_scale;
    for (int i = 0; i < config.n_samples; ++i) {
      const double arm = 2.0 * std::numbers::pi * static_cast<double>(i % kArms) / kArms;
      const double r = 1.0 + radial_std * rng.normal();
      const double t = tangential_std * rng.normal();
      const double angle = arm + kRate * std::exp(r);
      const double c = std::cos(angle), s = std::sin(angle);
      out.designs(i, 0) = kScale * (c * r - s * t);
      out.designs(i, 1) = kScale * (s * r + c * t);
    }
  }
  return out;
}

Embedding::Embedding(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  if (matrix_.cols() != 2 || matrix_.rows() < 2)
    throw DimensionError("embedding matrix must be d x 2 with d >= 2");
  const Eigen::Matrix2d gram = matrix_.transpose() * matrix_;
  if ((gram - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() > 1e-10)
    throw InvalidArgument("embedding columns are not orthonormal");
}

Embedding Embedding::identity() { return Embedding(Eigen::MatrixXd::Identity(2, 2)); }

Embedding Embedding::random(int target_dim, std::uint64_t seed) {
  if (target_dim < 2) throw ConfigError("dataset.d: must be >= 2");
  Rng rng(seed);
  Eigen::MatrixXd g(target_dim, 2);
  for (Eigen::Index r = 0; r < g.rows(); ++r)
    for (Eigen::Index c = 0; c < 2; ++c) g(r, c) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(target_dim, 2);
  return Embedding(std::move(q));
}

DesignSet embed(const DesignSet& points, const Embedding& embedding) {
  if (points.dim() != 2) throw DimensionError(dimension_message("embedded points", 2, points.dim()));
  DesignSet out;
  out.designs = points.designs * embedding.matrix().transpose();
  out.properties = points.properties;
  return out;
}

KdeModel::KdeModel(Eigen::MatrixXd centers, double bandwidth)
    : centers_(std::move(centers)), bandwidth_(bandwidth) {
  if (centers_.rows() == 0 || centers_.cols() == 0) throw InvalidArgument("KDE needs at least one center");
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) throw ConfigError("dataset.kde_bandwidth: must be > 0");
  if (!centers_.allFinite()) throw NonFiniteError("KDE centers must be finite");
  const double d = static_cast<double>(centers_.cols());
  log_norm_ = -0.5 * d * std::log(2.0 * std::numbers::pi * bandwidth_ * bandwidth_);
}

void KdeModel::check_dim(const Eigen::VectorXd& x) const {
  if (x.size() != centers_.cols()) throw DimensionError(dimension_message("KDE query", centers_.cols(), x.size()));
}

Eigen::VectorXd KdeModel::log_kernels(const Eigen::VectorXd& x) const {
  check_dim(x);
  const double inv = 1.0 / (2.0 * bandwidth_ * bandwidth_);
  return (log_norm_ - ((centers_.rowwise() - x.transpose()).rowwise().squaredNorm() * inv).array()).matrix();
}

double KdeModel::log_density(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd lk = log_kernels(x);
  const double top = lk.maxCoeff();
  return top + std::log((lk.array() - top).exp().sum()) - std::log(static_cast<double>(size()));
}

double KdeModel::density(const Eigen::VectorXd& x) const { return std::exp(log_density(x)); }

Eigen::VectorXd KdeModel::log_density_rows(const Eigen::MatrixXd& rows) const {
  Eigen::VectorXd out(rows.rows());
  for (Eigen::Index r = 0; r < rows.rows(); ++r) out[r] = log_density(rows.row(r).transpose());
  return out;
}

Eigen::MatrixXd KdeModel::density_hessian(const Eigen::VectorXd& x) const {
  // H = (1/n) sum_i N_i [ (x - c_i)(x - c_i)^T / s^4 - I / s^2 ]
  const Eigen::VectorXd lk = log_kernels(x);
  const double s2 = bandwidth_ * bandwidth_;
  const Eigen::Index d = dim();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  double weight_sum = 0.0;
  const double log_n = std::log(static_cast<double>(size()));
  for (Eigen::Index i = 0; i < size(); ++i) {
    const double w = std::exp(lk[i] - log_n);
    if (w == 0.0) continue;
    const Eigen::VectorXd diff = x - centers_.row(i).transpose();
    h.selfadjointView<Eigen::Lower>().rankUpdate(diff, w / (s2 * s2));
    weight_sum += w;
  }
  h = h.selfadjointView<Eigen::Lower>();
  h.diagonal().array() -= weight_sum / s2;
  return h;
}

// ---------------------------------------------------------------------------

void NacaParams::validate() const {
  if (!(m_camber >= 0.0 && m_camber <= 0.09)) throw ConfigError("naca.m: must lie in [0, 0.09]");
  if (!(p_pos >= 0.1 && p_pos <= 0.9)) throw ConfigError("naca.p: must lie in [0.1, 0.9]");
  if (!(t_thick >= 0.0 && t_thick <= 0.40)) throw ConfigError("naca.t: must lie in [0, 0.40]");
  if (n_points < 4 || n_points % 2 != 0) throw ConfigError("naca.n: must be an even integer >= 4");
}

double naca_half_thickness(double x, double t_thick, bool closed_trailing_edge) {
  const double c4 = closed_trailing_edge ? 0.1036 : 0.1015;
  return 5.0 * t_thick *
         (0.2969 * std::sqrt(x) - 0.1260 * x - 0.3516 * x * x + 0.2843 * x * x * x - c4 * x * x * x * x);
}

double naca_camber(double x, double m, double p) {
  if (m == 0.0) return 0.0;
  if (x < p) return m / (p * p) * (2.0 * p * x - x * x);
  return m / ((1.0 - p) * (1.0 - p)) * ((1.0 - 2.0 * p) + 2.0 * p * x - x * x);
}

double naca_camber_slope(double x, double m, double p) {
  if (m == 0.0) return 0.0;
  if (x < p) return 2.0 * m / (p * p) * (p - x);
  return 2.0 * m / ((1.0 - p) * (1.0 - p)) * (p - x);
}

namespace {

double station(int i, int stations) {
  return 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(stations - 1)));
}

}  // namespace

Eigen::VectorXd generate_naca(const NacaParams& params) {
  params.validate();
  const int k = params.n_points / 2;
  Eigen::VectorXd upper_x(k), upper_y(k), lower_x(k), lower_y(k);
  for (int i = 0; i < k; ++i) {
    const double x = station(i, k);
    const double yt = naca_half_thickness(x, params.t_thick, params.closed_trailing_edge);
    const double yc = naca_camber(x, params.m_camber, params.p_pos);
    const double theta = std::atan(naca_camber_slope(x, params.m_camber, params.p_pos));
    const double s = std::sin(theta), c = std::cos(theta);
    upper_x[i] = x - yt * s;
    upper_y[i] = yc + yt * c;
    lower_x[i] = x + yt * s;
    lower_y[i] = yc - yt * c;
  }
  Eigen::VectorXd out(2 * params.n_points);
  Eigen::Index pos = 0;
  for (int i = k - 1; i >= 0; --i) {
    out[pos++] = upper_x[i];
    out[pos++] = upper_y[i];
  }
  for (int i = 0; i < k; ++i) {
    out[pos++] = lower_x[i];
    out[pos++] = lower_y[i];
  }
  return out;
}

AirfoilDataset generate_airfoil_dataset(int n_shapes, std::uint64_t seed, int n_points,
                                        const AirfoilRanges& ranges) {
  if (n_shapes < 1) throw ConfigError("dataset.n: must be >= 1");
  Rng rng(seed);
  AirfoilDataset out;
  out.designs.designs.resize(n_shapes, 2 * n_points);
  out.designs.properties = Eigen::VectorXd::Zero(n_shapes);
  for (int i = 0; i < n_shapes; ++i) {
    NacaParams p;
    p.m_camber = rng.uniform(ranges.m_lo, ranges.m_hi);
    p.p_pos = rng.uniform(ranges.p_lo, ranges.p_hi);
    p.t_thick = rng.uniform(ranges.t_lo, ranges.t_hi);
    p.n_points = n_points;
    out.designs.designs.row(i) = generate_naca(p).transpose();
    out.params.push_back(p);
  }
  return out;
}

NacaParams fit_naca_params(const Eigen::VectorXd& coords) {
  if (coords.size() < 8 || coords.size() % 4 != 0)
    throw DimensionError("airfoil coordinate vector length must be a multiple of 4 and >= 8");
  const auto n = static_cast<int>(coords.size() / 2);
  const int k = n / 2;
  // Upper and lower points on the same station straddle the camber line
  // symmetrically, so their midpoint is a camber point and half their
  // separation is the local half-thickness.
  Eigen::VectorXd xm(k), ym(k), half(k);
  for (int i = 0; i < k; ++i) {
    const Eigen::Index u = k - 1 - i;
    const Eigen::Index l = k + i;
    const double ux = coords[2 * u], uy = coords[2 * u + 1];
    const double lx = coords[2 * l], ly = coords[2 * l + 1];
    xm[i] = std::clamp(0.5 * (ux + lx), 0.0, 1.0);
    ym[i] = 0.5 * (uy + ly);
    half[i] = 0.5 * std::hypot(ux - lx, uy - ly);
  }

  NacaParams fit;
  fit.n_points = n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < k; ++i) {
    const double phi = naca_half_thickness(xm[i], 1.0, fit.closed_trailing_edge);
    num += half[i] * phi;
    den += phi * phi;
  }
  fit.t_thick = std::clamp(den > 0.0 ? num / den : 0.0, 0.0, 0.40);

  // For fixed P the camber line is linear in M: solve M in closed form and
  // scan P, then refine P by golden section around the best grid point.
  auto solve_m = [&](double p, double* residual) {
    double a = 0.0, b = 0.0;
    for (int i = 0; i < k; ++i) {
      const double psi = naca_camber(xm[i], 1.0, p);
      a += ym[i] * psi;
      b += psi * psi;
    }
    const double m = std::clamp(b > 0.0 ? a / b : 0.0, 0.0, 0.09);
    double r = 0.0;
    for (int i = 0; i < k; ++i) {
      const double e = ym[i] - naca_camber(xm[i], m, p);
      r += e * e;
    }
    *residual = r;
    return m;
  };
  double best_p = 0.4, best_r = INFINITY;
  for (int g = 0; g <= 80; ++g) {
    const double p = 0.1 + 0.01 * g;
    double r;
    solve_m(p, &r);
    if (r < best_r) {
      best_r = r;
      best_p = p;
    }
  }
  double lo = std::max(0.1, best_p - 0.01), hi = std::min(0.9, best_p + 0.01);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 40; ++it) {
    const double a = hi - phi * (hi - lo), b = lo + phi * (hi - lo);
    double ra, rb;
    solve_m(a, &ra);
    solve_m(b, &rb);
    if (ra <= rb) hi = b;
    else lo = a;
  }
  double r;
  fit.p_pos = 0.5 * (lo + hi);
  fit.m_camber = solve_m(fit.p_pos, &r);
  return fit;
}

double synthetic_lift_to_drag(const NacaParams& p) {
  const double dp = p.p_pos - 0.4;
  const double dt = p.t_thick - 0.10;
  const double cl = 0.3 + 10.0 * p.m_camber * (1.0 - dp * dp);
  const double cd = 0.008 + 0.1 * dt * dt + 1.5 * p.m_camber * p.m_camber;
  return cl / cd / 10.0;
}

double synthetic_airfoil_property(const Eigen::VectorXd& coords) {
  return synthetic_lift_to_drag(fit_naca_params(coords));
}

void write_airfoil_csv(std::ostream& out, const Eigen::VectorXd& coords) {
  if (coords.size() % 2 != 0) throw DimensionError("airfoil coordinate vector must have even length");
  out << "x,y\n";
  for (Eigen::Index i = 0; i + 1 < coords.size(); i += 2)
    out << csv::format(coords[i]) << ',' << csv::format(coords[i + 1]) << '\n';
}

// ---------------------------------------------------------------------------

PropertyValue analytic_property(const AnalyticProperty& kind, const Eigen::VectorXd& x) {
  return std::visit(
      [&](const auto& g) -> PropertyValue {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, LinearProperty>) {
          if (g.w.size() != x.size()) throw DimensionError(dimension_message("linear property input", g.w.size(), x.size()));
          return {g.w.dot(x), g.w};
        } else {
          if (g.b.size() != x.size() || g.a.rows() != x.size() || g.a.cols() != x.size())
            throw DimensionError(dimension_message("quadratic property input", g.b.size(), x.size()));
          const Eigen::VectorXd diff = x - g.b;
          const Eigen::VectorXd ad = g.a * diff;
          return {-diff.dot(ad), -(ad + g.a.transpose() * diff)};
        }
      },
      kind);
}

}  // namespace propen
