#include "propen/theory.hpp"

#include <cmath>
#include <memory>
#include <ostream>

#include "propen/csv.hpp"
#include "propen/error.hpp"
#include "propen/propen.hpp"
#include "propen/rng.hpp"

namespace propen {

namespace {

Eigen::VectorXd uniform_in_ball(Rng& rng, Eigen::Index dim, double radius) {
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.normal();
  const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
  return v * (r / v.norm());
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double denom = a.norm() * b.norm();
  return denom > 0.0 ? a.dot(b) / denom : 0.0;
}

void require_matched(const Eigen::MatrixXd& targets, Eigen::Index seed_index) {
  if (targets.rows() == 0) throw InvalidArgument("seed " + std::to_string(seed_index) + " has no matches");
}

}  // namespace

double thm1_direction_check(const AnalyticProperty& g, const Eigen::VectorXd& seed, double radius, int n_samples,
                            std::uint64_t rng_seed) {
  if (!(radius > 0.0)) throw InvalidArgument("radius must be positive");
  if (n_samples < 1) throw InvalidArgument("n_samples must be >= 1");
  const PropertyValue at_seed = analytic_property(g, seed);
  Rng rng(rng_seed);
  const double r = std::sqrt(radius);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(seed.size());
  long kept = 0;
  for (int s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd step = uniform_in_ball(rng, seed.size(), r);
    if (analytic_property(g, seed + step).value > at_seed.value) {
      sum += step;
      ++kept;
    }
  }
  if (kept == 0) throw InvalidArgument("no sampled neighbour improves on the seed");
  return cosine(sum / static_cast<double>(kept), at_seed.gradient);
}

BoundCheck thm2_bound_check(const MatchedDataset& matched, const KdeModel& kde, Eigen::Index seed_index,
                            double beta) {
  const Eigen::MatrixXd targets = matches_of(matched, seed_index);
  require_matched(targets, seed_index);
  const Eigen::VectorXd fstar = tabular_minimizer(matched, seed_index, beta);
  double mean_p = 0.0;
  for (Eigen::Index r = 0; r < targets.rows(); ++r) mean_p += kde.density(targets.row(r).transpose());
  mean_p /= static_cast<double>(targets.rows());

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kde.density_hessian(fstar), Eigen::EigenvaluesOnly);
  const double spectral = eig.eigenvalues().cwiseAbs().maxCoeff();

  BoundCheck out;
  out.lhs = kde.density(fstar);
  out.rhs = mean_p - spectral * match_variance(matched, seed_index) / 2.0;
  out.holds = out.lhs >= out.rhs - 1e-12 * std::max(1.0, std::abs(out.rhs));
  return out;
}

std::vector<double> corollary_step_scaling(const MatchedDataset& matched, Eigen::Index seed_index,
                                           std::span<const double> betas) {
  require_matched(matches_of(matched, seed_index), seed_index);
  const Eigen::VectorXd x = matched.data->design(seed_index);
  std::vector<double> out;
  out.reserve(betas.size());
  for (double b : betas) out.push_back((tabular_minimizer(matched, seed_index, b) - x).norm());
  return out;
}

void ColinearityCheckConfig::validate() const {
  if (!(lambda1 > 0.0)) throw ConfigError("colinearity.lambda1: must be > 0");
  if (!(lambda2 > 0.0)) throw ConfigError("colinearity.lambda2: must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("colinearity.alpha: must be in (0, 1]");
  if (!(delta_y_lower >= 0.0)) throw ConfigError("colinearity.delta_y_lower: must be >= 0");
}

ColinearityResult colinearity_condition(const ColinearityCheckConfig& config, const MatchConfig& match_config,
                                        const MatchedDataset& matched, Eigen::Index seed_index, double beta,
                                        const AnalyticProperty& g) {
  config.validate();
  match_config.validate();
  const Eigen::MatrixXd targets = matches_of(matched, seed_index);
  require_matched(targets, seed_index);
  const Eigen::VectorXd x = matched.data->design(seed_index);
  const Eigen::VectorXd mean = targets.colwise().mean().transpose();

  // ||E[x'] - x|| rather than ||E[x'] - (1 - beta) x||: the step direction
  // does not depend on beta, and only this form bounds the cosine for beta > 0.
  ColinearityResult out;
  out.delta_x_bound = 2.0 * (config.delta_y_lower - config.alpha * config.lambda1 * (mean - x).norm()) / config.lambda2;
  out.condition_met = match_config.delta_x < out.delta_x_bound;
  const Eigen::VectorXd step = tabular_minimizer(matched, seed_index, beta) - x;
  out.achieved_cosine = cosine(step, analytic_property(g, x).gradient);
  return out;
}

double Thm2Sweep::hold_rate() const {
  if (checks.empty()) return 0.0;
  long held = 0;
  for (const auto& c : checks) held += c.holds ? 1 : 0;
  return static_cast<double>(held) / static_cast<double>(checks.size());
}

Thm2Sweep thm2_pinwheel_sweep(const Thm2SweepConfig& config) {
  ToyConfig toy;
  toy.family = ToyFamily::Pinwheel;
  toy.n_samples = config.n_samples;
  toy.noise_scale = config.noise_scale;
  toy.rng_seed = config.rng_seed;
  auto data = std::make_shared<DesignSet>(generate_toy(toy));
  const KdeModel kde(data->designs, config.kde_bandwidth);
  data->properties = kde.log_density_rows(data->designs);
  const MatchedDataset matched = build_matched_dataset(std::shared_ptr<const DesignSet>(data), config.match);

  Thm2Sweep sweep;
  for (std::size_t k = 0; k < matched.pairs.size(); ++k) {
    const Eigen::Index s = matched.pairs[k].source;
    if (!sweep.seeds.empty() && sweep.seeds.back() == s) continue;
    sweep.seeds.push_back(s);
    sweep.checks.push_back(thm2_bound_check(matched, kde, s, config.beta));
  }
  return sweep;
}

namespace {

struct CheckWriter {
  std::ostream& out;
  int failures = 0;

  void row(const std::string& check, long instance, double lhs, double rhs, bool holds) {
    out << check << ',' << instance << ',' << csv::format(lhs) << ',' << csv::format(rhs) << ','
        << (holds ? "true" : "false") << '\n';
    if (!holds) ++failures;
  }
};

Eigen::VectorXd random_vector(Rng& rng, Eigen::Index dim) {
  Eigen::VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = rng.normal();
  return v;
}

void thm1_rows(CheckWriter& w, std::uint64_t seed) {
  long instance = 0;
  for (int dim : {2, 10}) {
    for (int k = 0; k < 10; ++k) {
      Rng rng(derive_seed(seed, 0x100 + static_cast<std::uint64_t>(instance)));
      const LinearProperty g{random_vector(rng, dim)};
      const Eigen::VectorXd x = random_vector(rng, dim);
      const double c = thm1_direction_check(g, x, 1.0, 10000, rng.next());
      w.row("thm1_linear_d" + std::to_string(dim), instance++, c, 0.95, c > 0.95);
    }
  }
}

void thm2_rows(CheckWriter& w, std::uint64_t seed) {
  {
    auto data = std::make_shared<DesignSet>();
    data->designs = (Eigen::MatrixXd(2, 2) << 0.0, 0.0, 0.3, 0.1).finished();
    data->properties = Eigen::Vector2d(0.0, 0.5);
    const MatchedDataset matched = build_matched_dataset(std::shared_ptr<const DesignSet>(data), {1.0, 1.0, 0.0});
    const KdeModel kde(data->designs, 0.5);
    const BoundCheck c = thm2_bound_check(matched, kde, 0, 0.0);
    w.row("thm2_single_match", 0, c.lhs, c.rhs, std::abs(c.lhs - c.rhs) <= 1e-10);
  }
  {
    // Seed below two matches placed symmetrically about the single KDE center.
    auto data = std::make_shared<DesignSet>();
    data->designs = (Eigen::MatrixXd(3, 2) << 0.0, -0.6, -0.2, 0.0, 0.2, 0.0).finished();
    data->properties = Eigen::Vector3d(0.0, 0.5, 0.5);
    const MatchedDataset matched = build_matched_dataset(std::shared_ptr<const DesignSet>(data), {1.0, 1.0, 0.0});
    const KdeModel kde(Eigen::MatrixXd::Zero(1, 2), 1.0);
    const BoundCheck c = thm2_bound_check(matched, kde, 0, 0.0);
    w.row("thm2_two_point_concave", 0, c.lhs, c.rhs, c.lhs > c.rhs);
  }
  Thm2SweepConfig cfg;
  cfg.rng_seed = seed;
  const Thm2Sweep sweep = thm2_pinwheel_sweep(cfg);
  w.row("thm2_pinwheel_hold_rate", static_cast<long>(sweep.checks.size()), sweep.hold_rate(), 0.9,
        sweep.hold_rate() >= 0.9);
}

void corollary_rows(CheckWriter& w, std::uint64_t seed) {
  const double betas[] = {0.0, 1.0, 3.0};
  long instance = 0;
  for (int k = 0; k < 20; ++k) {
    Rng rng(derive_seed(seed, 0x200 + static_cast<std::uint64_t>(k)));
    auto data = std::make_shared<DesignSet>();
    data->designs.resize(20, 3);
    for (Eigen::Index i = 0; i < data->designs.size(); ++i) data->designs.data()[i] = rng.normal();
    data->properties = random_vector(rng, 20);
    const MatchedDataset matched = build_matched_dataset(std::shared_ptr<const DesignSet>(data), {100.0, 100.0, 0.0});
    if (matched.empty()) continue;
    const auto steps = corollary_step_scaling(matched, matched.pairs.front().source, betas);
    for (std::size_t b = 1; b < steps.size(); ++b) {
      const double ratio = steps[0] / steps[b];
      const double expect = 1.0 + betas[b];
      w.row("corollary_beta" + csv::format(betas[b]), instance, ratio, expect,
            std::abs(ratio - expect) <= 1e-12 * expect);
    }
    ++instance;
  }
}

void colinearity_rows(CheckWriter& w, std::uint64_t seed) {
  long instance = 0;
  for (int k = 0; k < 200; ++k) {
    Rng rng(derive_seed(seed, 0x300 + static_cast<std::uint64_t>(k)));
    const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng.below(4));
    Eigen::MatrixXd b(dim, dim);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
    const QuadraticProperty g{0.1 * b.transpose() * b / static_cast<double>(dim), 3.0 * random_vector(rng, dim)};
    const double dx = 0.05;
    auto data = std::make_shared<DesignSet>();
    data->designs.resize(41, dim);
    data->designs.row(0) = random_vector(rng, dim).transpose();
    for (Eigen::Index i = 1; i < 41; ++i)
      data->designs.row(i) = data->designs.row(0) + uniform_in_ball(rng, dim, std::sqrt(dx)).transpose();
    data->properties.resize(41);
    for (Eigen::Index i = 0; i < 41; ++i) data->properties[i] = analytic_property(g, data->design(i)).value;

    ColinearityCheckConfig cfg;
    cfg.lambda1 = analytic_property(g, data->design(0)).gradient.norm();
    cfg.lambda2 = 2.0 * Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g.a).eigenvalues().cwiseAbs().maxCoeff();
    cfg.alpha = 0.5;
    cfg.delta_y_lower = 0.6 * cfg.lambda1 * std::sqrt(dx);
    if (!(cfg.lambda1 > 0.0) || !(cfg.lambda2 > 0.0)) continue;
    const MatchConfig mc{dx, 1e9, cfg.delta_y_lower};
    const MatchedDataset matched = build_matched_dataset(std::shared_ptr<const DesignSet>(data), mc);
    if (matches_of(matched, 0).rows() == 0) continue;
    const ColinearityResult r = colinearity_condition(cfg, mc, matched, 0, 0.0, g);
    w.row(r.condition_met ? "colinearity_met" : "colinearity_unmet", instance++, r.achieved_cosine, cfg.alpha,
          !r.condition_met || r.achieved_cosine >= cfg.alpha);
  }
}

}  // namespace

int run_theory_checks(const std::string& which, std::ostream& out, std::uint64_t rng_seed) {
  const bool all = which == "all";
  if (!all && which != "thm1" && which != "thm2" && which != "corollary" && which != "colinearity")
    throw InvalidArgument("unknown check '" + which + "' (expected thm1, thm2, corollary, colinearity or all)");
  CheckWriter w{out};
  out << "check,instance,lhs,rhs,holds\n";
  if (all || which == "thm1") thm1_rows(w, rng_seed);
  if (all || which == "thm2") thm2_rows(w, rng_seed);
  if (all || which == "corollary") corollary_rows(w, rng_seed);
  if (all || which == "colinearity") colinearity_rows(w, rng_seed);
  return w.failures;
}

}  // namespace propen
