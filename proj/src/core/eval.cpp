#include "propen/eval.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "propen/csv.hpp"
#include "propen/error.hpp"

namespace propen {

namespace {

void require_nonempty(std::size_t n, const char* what) {
  if (n == 0) throw InvalidArgument(std::string(what) + ": input must be nonempty");
}

}  // namespace

double ratio_of_improvement(std::span<const PropertyPair> pairs) {
  require_nonempty(pairs.size(), "ratio_of_improvement");
  std::size_t improved = 0;
  for (const auto& [seed, cand] : pairs)
    if (cand > seed) ++improved;
  return 100.0 * static_cast<double>(improved) / static_cast<double>(pairs.size());
}

double average_improvement(std::span<const PropertyPair> pairs) {
  require_nonempty(pairs.size(), "average_improvement");
  double sum = 0.0;
  for (const auto& [seed, cand] : pairs) sum += cand - seed;
  return sum / static_cast<double>(pairs.size());
}

double uniqueness(std::span<const Eigen::VectorXd> candidates, double tol) {
  require_nonempty(candidates.size(), "uniqueness");
  std::vector<const Eigen::VectorXd*> reps;
  for (const auto& c : candidates) {
    bool seen = false;
    for (const auto* r : reps) {
      if (r->size() == c.size() && (*r - c).cwiseAbs().maxCoeff() <= tol) {
        seen = true;
        break;
      }
    }
    if (!seen) reps.push_back(&c);
  }
  return 100.0 * static_cast<double>(reps.size()) / static_cast<double>(candidates.size());
}

double novelty(std::span<const Eigen::VectorXd> candidates, const Eigen::MatrixXd& training, double tol) {
  require_nonempty(candidates.size(), "novelty");
  std::size_t novel = 0;
  for (const auto& c : candidates) {
    if (training.rows() > 0 && c.size() != training.cols())
      throw DimensionError(dimension_message("novelty candidate", training.cols(), c.size()));
    bool near = false;
    for (Eigen::Index r = 0; r < training.rows() && !near; ++r)
      near = (training.row(r).transpose() - c).norm() <= tol;
    if (!near) ++novel;
  }
  return 100.0 * static_cast<double>(novel) / static_cast<double>(candidates.size());
}

namespace {

constexpr const char* kEvalHeader =
    "method,dataset,n,d,repetition,ratio_of_improvement,average_improvement,uniqueness,novelty,"
    "loglik_sum_seeds,loglik_sum_candidates";

}  // namespace

void write_eval_csv_header(std::ostream& out) { out << kEvalHeader << '\n'; }

void write_eval_csv_row(std::ostream& out, const EvalRow& row) {
  const auto& r = row.report;
  out << row.method << ',' << row.dataset << ',' << row.n << ',' << row.d << ',' << row.repetition << ','
      << csv::format(r.ratio_of_improvement) << ',' << csv::format(r.average_improvement) << ','
      << csv::format(r.uniqueness) << ',' << csv::format(r.novelty) << ',' << csv::format(r.loglik_sum_seeds)
      << ',' << csv::format(r.loglik_sum_candidates) << '\n';
}

std::vector<EvalRow> read_eval_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || csv::trim(line) != kEvalHeader) throw IoError("unexpected evaluation CSV header");
  std::vector<EvalRow> rows;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 11) throw IoError("evaluation CSV line " + std::to_string(line_no) + ": expected 11 fields");
    EvalRow row;
    row.method = f[0];
    row.dataset = f[1];
    row.n = csv::parse_long(f[2]);
    row.d = csv::parse_long(f[3]);
    row.repetition = csv::parse_long(f[4]);
    row.report = {csv::parse_double(f[5]), csv::parse_double(f[6]), csv::parse_double(f[7]),
                  csv::parse_double(f[8]), csv::parse_double(f[9]), csv::parse_double(f[10])};
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

MetricSummary summarize_metric(const std::vector<double>& v) {
  MetricSummary s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

}  // namespace

std::vector<SummaryRow> summarize(std::span<const EvalRow> rows) {
  std::vector<SummaryRow> out;
  std::vector<std::vector<const EvalRow*>> groups;
  for (const auto& row : rows) {
    std::size_t g = 0;
    for (; g < out.size(); ++g)
      if (out[g].method == row.method && out[g].dataset == row.dataset && out[g].n == row.n && out[g].d == row.d)
        break;
    if (g == out.size()) {
      SummaryRow s;
      s.method = row.method;
      s.dataset = row.dataset;
      s.n = row.n;
      s.d = row.d;
      out.push_back(std::move(s));
      groups.emplace_back();
    }
    groups[g].push_back(&row);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    auto collect = [&](double EvalReport::*field) {
      std::vector<double> v;
      for (const auto* r : groups[g]) v.push_back(r->report.*field);
      return summarize_metric(v);
    };
    auto& s = out[g];
    s.repetitions = static_cast<long>(groups[g].size());
    s.ratio_of_improvement = collect(&EvalReport::ratio_of_improvement);
    s.average_improvement = collect(&EvalReport::average_improvement);
    s.uniqueness = collect(&EvalReport::uniqueness);
    s.novelty = collect(&EvalReport::novelty);
    s.loglik_sum_seeds = collect(&EvalReport::loglik_sum_seeds);
    s.loglik_sum_candidates = collect(&EvalReport::loglik_sum_candidates);
  }
  return out;
}

void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  out << "method,dataset,n,d,repetitions";
  for (const char* name : {"ratio_of_improvement", "average_improvement", "uniqueness", "novelty",
                           "loglik_sum_seeds", "loglik_sum_candidates"})
    out << ',' << name << "_mean," << name << "_std";
  out << '\n';
  for (const auto& s : rows) {
    out << s.method << ',' << s.dataset << ',' << s.n << ',' << s.d << ',' << s.repetitions;
    for (const auto* m : {&s.ratio_of_improvement, &s.average_improvement, &s.uniqueness, &s.novelty,
                          &s.loglik_sum_seeds, &s.loglik_sum_candidates})
      out << ',' << csv::format(m->mean) << ',' << csv::format(m->std);
    out << '\n';
  }
}

}  // namespace propen
