#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace propen {

// (g(seed), g(candidate))
using PropertyPair = std::pair<double, double>;

// Percentage of pairs whose candidate strictly improves on its seed.
double ratio_of_improvement(std::span<const PropertyPair> pairs);

// Mean of g(candidate) - g(seed).
double average_improvement(std::span<const PropertyPair> pairs);

// Percentage of candidates that open a new class under greedy first-occurrence
// clustering with L-infinity tolerance tol.
double uniqueness(std::span<const Eigen::VectorXd> candidates, double tol);

// Percentage of candidates farther than tol (Euclidean) from every training row.
double novelty(std::span<const Eigen::VectorXd> candidates, const Eigen::MatrixXd& training, double tol);

struct EvalReport {
  double ratio_of_improvement = 0.0;
  double average_improvement = 0.0;
  double uniqueness = 0.0;
  double novelty = 0.0;
  // Summed log-likelihood under the training-data KDE (negative numbers;
  // larger is better).
  double loglik_sum_seeds = 0.0;
  double loglik_sum_candidates = 0.0;
};

struct EvalRow {
  std::string method;
  std::string dataset;
  long n = 0;
  long d = 0;
  long repetition = 0;
  EvalReport report;
};

void write_eval_csv_header(std::ostream& out);
void write_eval_csv_row(std::ostream& out, const EvalRow& row);
std::vector<EvalRow> read_eval_csv(std::istream& in);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1), 0 for a single row
};

struct SummaryRow {
  std::string method;
  std::string dataset;
  long n = 0;
  long d = 0;
  long repetitions = 0;
  MetricSummary ratio_of_improvement, average_improvement, uniqueness, novelty, loglik_sum_seeds,
      loglik_sum_candidates;
};

// Groups rows by (method, dataset, n, d) in first-appearance order.
std::vector<SummaryRow> summarize(std::span<const EvalRow> rows);
void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows);

}  // namespace propen
