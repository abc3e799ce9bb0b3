#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "propen/datasets.hpp"
#include "propen/matching.hpp"

namespace propen {

// Verification harnesses for the matched-reconstruction theory. None of this
// is on the training or optimization path.

// Samples n_samples points uniformly in the ball of radius sqrt(radius)
// around seed (radius is a squared distance, like MatchConfig::delta_x),
// keeps those with g(x') > g(seed) and returns the cosine between their mean
// displacement and grad g(seed). Throws InvalidArgument if nothing improves.
double thm1_direction_check(const AnalyticProperty& g, const Eigen::VectorXd& seed, double radius, int n_samples,
                            std::uint64_t rng_seed);

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

// lhs = p(f*(x)), rhs = mean_{x' in M_x} p(x') - ||H_p(f*(x))||_2 * var(M_x) / 2,
// with f* the tabular minimizer at beta.
BoundCheck thm2_bound_check(const MatchedDataset& matched, const KdeModel& kde, Eigen::Index seed_index, double beta);

// ||f*_beta(x) - x|| for every beta.
std::vector<double> corollary_step_scaling(const MatchedDataset& matched, Eigen::Index seed_index,
                                           std::span<const double> betas);

struct ColinearityCheckConfig {
  double lambda1 = 1.0;        // bound on ||grad g||
  double lambda2 = 1.0;        // Lipschitz constant of grad g
  double alpha = 0.5;          // target cosine, (0, 1]
  double delta_y_lower = 0.0;  // lower property gap used for matching

  void validate() const;
};

struct ColinearityResult {
  bool condition_met = false;
  double achieved_cosine = 0.0;
  double delta_x_bound = 0.0;  // condition_met iff delta_x < delta_x_bound
};

// Sufficient condition delta_x < 2 (delta_y - alpha lambda1 ||E[x'] - x||) / lambda2
// and the realized cosine between f*_beta(x) - x and grad g(x).
ColinearityResult colinearity_condition(const ColinearityCheckConfig& config, const MatchConfig& match_config,
                                        const MatchedDataset& matched, Eigen::Index seed_index, double beta,
                                        const AnalyticProperty& g);

// Matched seeds of a pinwheel sample and the fraction where thm2 holds.
struct Thm2Sweep {
  std::vector<Eigen::Index> seeds;
  std::vector<BoundCheck> checks;
  double hold_rate() const;
};

struct Thm2SweepConfig {
  int n_samples = 200;
  double noise_scale = 0.1;
  double kde_bandwidth = 0.3;
  MatchConfig match{0.05, 100.0, 0.0};
  double beta = 0.0;
  std::uint64_t rng_seed = 0;
};

Thm2Sweep thm2_pinwheel_sweep(const Thm2SweepConfig& config);

// Runs one family of checks ("thm1", "thm2", "corollary", "colinearity" or
// "all") and writes CSV rows "check,instance,lhs,rhs,holds" with a header.
// Returns the number of rows with holds = false; throws InvalidArgument on an
// unknown name.
int run_theory_checks(const std::string& which, std::ostream& out, std::uint64_t rng_seed = 0);

}  // namespace propen
