#include "propen/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "propen/csv.hpp"
#include "propen/error.hpp"
#include "propen/rng.hpp"

namespace propen {

namespace {

bool is_propen_method(const std::string& m) {
  return m == "propen_x2x" || m == "propen_xy2xy" || m == "propen_mix_x2x" || m == "propen_mix_xy2xy";
}

PropEnVariant variant_for(const std::string& method, double mix_beta) {
  PropEnVariant v;
  v.io_mode = method.ends_with("xy2xy") ? IoMode::XY2XY : IoMode::X2X;
  v.mix_beta = method.starts_with("propen_mix_") ? mix_beta : 0.0;
  return v;
}

// (delta_x, delta_y) pairs: equal-length lists are zipped, a single value
// is broadcast against the other list.
std::vector<std::pair<double, double>> threshold_pairs(const ExperimentConfig& c) {
  std::vector<std::pair<double, double>> out;
  const std::size_t n = std::max(c.delta_x.size(), c.delta_y.size());
  for (std::size_t i = 0; i < n; ++i)
    out.emplace_back(c.delta_x[c.delta_x.size() == 1 ? 0 : i], c.delta_y[c.delta_y.size() == 1 ? 0 : i]);
  return out;
}

}  // namespace

const char* family_name(DatasetFamily family) {
  switch (family) {
    case DatasetFamily::EightGaussians: return "eight_gaussians";
    case DatasetFamily::Pinwheel: return "pinwheel";
    case DatasetFamily::Airfoil: return "airfoil";
  }
  return "unknown";
}

ExperimentConfig ExperimentConfig::defaults(DatasetFamily family) {
  ExperimentConfig c;
  c.dataset.family = family;
  if (family == DatasetFamily::Airfoil) {
    c.arch.hidden_widths = {100, 100, 100};
    c.arch.latent_dim = 50;
    c.train.epochs = 1000;
    c.train.batch_size = 100;
    c.delta_x = {0.3, 0.5, 0.7, 1.0};
    c.delta_y = {0.3, 0.5, 0.7, 1.0};
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (repetitions < 1) throw ConfigError("experiment.repetitions: must be >= 1");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw ConfigError("experiment.holdout_fraction: must lie in (0, 1)");
  if (threads < 1) throw ConfigError("experiment.threads: must be >= 1");
  if (output_dir.empty()) throw ConfigError("experiment.output_dir: must not be empty");

  if (dataset.n.empty()) throw ConfigError("dataset.n: needs at least one value");
  for (int n : dataset.n) {
    const auto hold = static_cast<long>(std::lround(holdout_fraction * n));
    if (n < 4 || hold < 1 || n - hold < 2)
      throw ConfigError("dataset.n: " + std::to_string(n) + " leaves no holdout or fewer than 2 training designs");
  }
  if (dataset.family != DatasetFamily::Airfoil) {
    if (dataset.d.empty()) throw ConfigError("dataset.d: needs at least one value");
    for (int d : dataset.d)
      if (d < 2) throw ConfigError("dataset.d: must be >= 2");
    if (!(dataset.noise > 0.0) || !std::isfinite(dataset.noise)) throw ConfigError("dataset.noise: must be > 0");
  } else {
    if (dataset.airfoil_points < 4 || dataset.airfoil_points % 2 != 0)
      throw ConfigError("dataset.airfoil_points: must be an even integer >= 4");
    const auto& r = dataset.airfoil_ranges;
    if (!(r.m_lo >= 0.0 && r.m_lo <= r.m_hi && r.m_hi <= 0.09)) throw ConfigError("dataset.airfoil_m: bad range");
    if (!(r.p_lo >= 0.1 && r.p_lo <= r.p_hi && r.p_hi <= 0.9)) throw ConfigError("dataset.airfoil_p: bad range");
    if (!(r.t_lo > 0.0 && r.t_lo <= r.t_hi && r.t_hi <= 0.4)) throw ConfigError("dataset.airfoil_t: bad range");
  }
  if (!(dataset.kde_bandwidth > 0.0) || !std::isfinite(dataset.kde_bandwidth))
    throw ConfigError("dataset.kde_bandwidth: must be > 0");

  if (delta_x.empty() || delta_y.empty()) throw ConfigError("match.delta_x: needs at least one value");
  if (delta_x.size() != delta_y.size() && delta_x.size() != 1 && delta_y.size() != 1)
    throw ConfigError("match.delta_y: list length must equal match.delta_x or be 1");
  for (const auto& [dx, dy] : threshold_pairs(*this)) MatchConfig{dx, dy, delta_y_lower}.validate();

  if (methods.empty()) throw ConfigError("methods.list: needs at least one method");
  std::set<std::string> seen;
  bool mix = false;
  for (const auto& m : methods) {
    if (!is_propen_method(m) && m != "explicit") throw ConfigError("methods.list: unknown method '" + m + "'");
    if (!seen.insert(m).second) throw ConfigError("methods.list: duplicate method '" + m + "'");
    mix = mix || m.starts_with("propen_mix_");
  }
  if (mix && !(mix_beta > 0.0 && std::isfinite(mix_beta))) throw ConfigError("methods.mix_beta: must be > 0");

  arch.validate();
  train.validate();
  optimize.validate();
  guidance.validate();
  if (!(tolerance >= 0.0)) throw ConfigError("eval.tolerance: must be >= 0");
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

namespace pt = boost::property_tree;

class Fields {
 public:
  explicit Fields(const pt::ptree& tree) : tree_(tree) {}

  const std::string* raw(const std::string& section, const std::string& key) {
    known_[section].insert(key);
    const auto sec = tree_.get_child_optional(pt::ptree::path_type(section, '\0'));
    if (!sec) return nullptr;
    const auto val = sec->get_child_optional(pt::ptree::path_type(key, '\0'));
    if (!val) return nullptr;
    return &val->data();
  }

  template <typename T, typename Parse>
  void get(const std::string& section, const std::string& key, T& out, Parse parse) {
    const std::string* v = raw(section, key);
    if (!v) return;
    try {
      out = parse(csv::trim(*v));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(section + "." + key + ": " + e.what());
    }
  }

  void check_unknown() const {
    for (const auto& [section, body] : tree_) {
      const auto it = known_.find(section);
      if (it == known_.end()) throw ConfigError("unknown section [" + section + "]");
      for (const auto& [key, unused] : body)
        if (!it->second.count(key)) throw ConfigError(section + "." + key + ": unknown key");
    }
  }

 private:
  const pt::ptree& tree_;
  std::map<std::string, std::set<std::string>> known_;
};

double to_double(std::string_view s) { return csv::parse_double(s); }

int to_int(std::string_view s) {
  const long v = csv::parse_long(s);
  if (v < -2147483647L || v > 2147483647L) throw InvalidArgument("integer out of range");
  return static_cast<int>(v);
}

std::vector<std::string> to_list(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& item : csv::split(s)) {
    const auto t = csv::trim(item);
    if (t.empty()) throw InvalidArgument("empty list item");
    out.emplace_back(t);
  }
  return out;
}

std::vector<int> to_int_list(std::string_view s) {
  std::vector<int> out;
  for (const auto& item : to_list(s)) out.push_back(to_int(item));
  return out;
}

std::vector<double> to_double_list(std::string_view s) {
  std::vector<double> out;
  for (const auto& item : to_list(s)) out.push_back(to_double(item));
  return out;
}

std::pair<double, double> to_range(std::string_view s) {
  const auto v = to_double_list(s);
  if (v.size() != 2) throw InvalidArgument("expected 'lo, hi'");
  return {v[0], v[1]};
}

DatasetFamily to_family(std::string_view s) {
  if (s == "eight_gaussians") return DatasetFamily::EightGaussians;
  if (s == "pinwheel") return DatasetFamily::Pinwheel;
  if (s == "airfoil") return DatasetFamily::Airfoil;
  throw InvalidArgument("expected eight_gaussians, pinwheel or airfoil, got '" + std::string(s) + "'");
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  Fields f(tree);
  DatasetFamily family = DatasetFamily::EightGaussians;
  f.get("dataset", "family", family, to_family);
  ExperimentConfig c = ExperimentConfig::defaults(family);

  f.get("experiment", "name", c.name, [](std::string_view s) { return std::string(s); });
  f.get("experiment", "repetitions", c.repetitions, to_int);
  f.get("experiment", "holdout_fraction", c.holdout_fraction, to_double);
  f.get("experiment", "output_dir", c.output_dir, [](std::string_view s) { return std::filesystem::path(s); });
  f.get("experiment", "seed", c.seed, [](std::string_view s) {
    const long v = csv::parse_long(s);
    if (v < 0) throw InvalidArgument("must be >= 0");
    return static_cast<std::uint64_t>(v);
  });
  f.get("experiment", "threads", c.threads, to_int);

  f.get("dataset", "n", c.dataset.n, to_int_list);
  f.get("dataset", "d", c.dataset.d, to_int_list);
  f.get("dataset", "noise", c.dataset.noise, to_double);
  f.get("dataset", "kde_bandwidth", c.dataset.kde_bandwidth, to_double);
  f.get("dataset", "airfoil_points", c.dataset.airfoil_points, to_int);
  auto& r = c.dataset.airfoil_ranges;
  std::pair<double, double> range;
  if (f.raw("dataset", "airfoil_m")) { f.get("dataset", "airfoil_m", range, to_range); std::tie(r.m_lo, r.m_hi) = range; }
  if (f.raw("dataset", "airfoil_p")) { f.get("dataset", "airfoil_p", range, to_range); std::tie(r.p_lo, r.p_hi) = range; }
  if (f.raw("dataset", "airfoil_t")) { f.get("dataset", "airfoil_t", range, to_range); std::tie(r.t_lo, r.t_hi) = range; }

  f.get("match", "delta_x", c.delta_x, to_double_list);
  f.get("match", "delta_y", c.delta_y, to_double_list);
  f.get("match", "delta_y_lower", c.delta_y_lower, to_double);

  f.get("methods", "list", c.methods, to_list);
  f.get("methods", "mix_beta", c.mix_beta, to_double);

  f.get("arch", "hidden", c.arch.hidden_widths, to_int_list);
  f.get("arch", "latent", c.arch.latent_dim, to_int);

  f.get("train", "epochs", c.train.epochs, to_int);
  f.get("train", "batch_size", c.train.batch_size, to_int);
  f.get("train", "learning_rate", c.train.learning_rate, to_double);

  f.get("optimize", "max_steps", c.optimize.max_steps, to_int);
  f.get("optimize", "convergence_eps", c.optimize.convergence_eps, to_double);

  f.get("guidance", "step_size", c.guidance.step_size, to_double);
  f.get("guidance", "n_steps", c.guidance.n_steps, to_int);

  f.get("eval", "tolerance", c.tolerance, to_double);

  f.check_unknown();
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_experiment_config(in);
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

namespace {

struct Job {
  int n = 0;
  int d = 0;  // requested toy dimension
  double delta_x = 0.0;
  double delta_y = 0.0;
  int repetition = 0;
  std::string dataset_label;
  std::string tag;
};

struct JobOutput {
  std::vector<EvalRow> rows;
  std::vector<std::filesystem::path> files;
};

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

JobOutput run_job(const ExperimentConfig& config, const Job& job) {
  const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(job.repetition);
  const bool airfoil = config.dataset.family == DatasetFamily::Airfoil;

  DesignSet all;
  if (airfoil) {
    all = generate_airfoil_dataset(job.n, derive_seed(seed, 1), config.dataset.airfoil_points,
                                   config.dataset.airfoil_ranges)
              .designs;
  } else {
    ToyConfig toy;
    toy.family = config.dataset.family == DatasetFamily::Pinwheel ? ToyFamily::Pinwheel : ToyFamily::EightGaussians;
    toy.n_samples = job.n;
    toy.noise_scale = config.dataset.noise;
    toy.rng_seed = derive_seed(seed, 1);
    const DesignSet points = generate_toy(toy);
    all = embed(points, job.d == 2 ? Embedding::identity() : Embedding::random(job.d, derive_seed(seed, 2)));
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(all.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  Rng split_rng(derive_seed(seed, 3));
  split_rng.shuffle(std::span<Eigen::Index>(order));
  const auto n_hold = static_cast<std::size_t>(std::lround(config.holdout_fraction * job.n));
  std::vector<Eigen::Index> holdout(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<Eigen::Index> training(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
  std::sort(holdout.begin(), holdout.end());
  std::sort(training.begin(), training.end());

  auto train_set = std::make_shared<DesignSet>(all.subset(training));
  const KdeModel kde(train_set->designs, config.dataset.kde_bandwidth);
  PropertyOracle oracle;
  if (airfoil) {
    oracle = [](const Eigen::VectorXd& x) { return synthetic_airfoil_property(x); };
    for (Eigen::Index i = 0; i < train_set->size(); ++i) train_set->properties[i] = oracle(train_set->design(i));
  } else {
    oracle = [&kde](const Eigen::VectorXd& x) { return kde.log_density(x); };
    train_set->properties = kde.log_density_rows(train_set->designs);
  }

  const MatchConfig match_config{job.delta_x, job.delta_y, config.delta_y_lower};
  const MatchedDataset matched = build_matched_dataset(std::shared_ptr<const DesignSet>(train_set), match_config);

  std::ostringstream eval_csv, traj_csv;
  write_eval_csv_header(eval_csv);
  write_trajectory_csv_header(traj_csv, all.dim(), true);

  JobOutput out;
  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    const std::string& method = config.methods[mi];
    TrainConfig tc = config.train;
    tc.rng_seed = derive_seed(seed, 0x10 + mi);

    std::vector<Trajectory> trajectories;
    if (method == "explicit") {
      const ExplicitTrainResult trained = train_explicit(*train_set, config.arch, tc);
      for (Eigen::Index h : holdout) trajectories.push_back(guide(trained.model, all.design(h), config.guidance, oracle));
    } else {
      if (matched.empty())
        throw EmptyMatchError("no matched pairs for delta_x=" + csv::format(job.delta_x) +
                              " delta_y=" + csv::format(job.delta_y) + " (" + job.tag +
                              "); increase match.delta_x or match.delta_y");
      const PropEnTrainResult trained = train_propen(matched, variant_for(method, config.mix_beta), config.arch, tc);
      for (Eigen::Index h : holdout)
        trajectories.push_back(optimize(trained.model, all.design(h), config.optimize, oracle));
    }

    std::vector<PropertyPair> pairs;
    std::vector<Eigen::VectorXd> finals;
    EvalReport report;
    for (std::size_t k = 0; k < holdout.size(); ++k) {
      const Trajectory& t = trajectories[k];
      const Eigen::VectorXd seed_x = all.design(holdout[k]);
      pairs.emplace_back(oracle(seed_x), t.property_values.back());
      finals.push_back(t.final_state());
      report.loglik_sum_seeds += kde.log_density(seed_x);
      report.loglik_sum_candidates += kde.log_density(t.final_state());
      write_trajectory_csv_rows(traj_csv, t, static_cast<long>(holdout[k]), method);
    }
    report.ratio_of_improvement = ratio_of_improvement(pairs);
    report.average_improvement = average_improvement(pairs);
    report.uniqueness = uniqueness(finals, config.tolerance);
    report.novelty = novelty(finals, train_set->designs, config.tolerance);

    EvalRow row{method, job.dataset_label, job.n, static_cast<long>(all.dim()), job.repetition, report};
    write_eval_csv_row(eval_csv, row);
    out.rows.push_back(std::move(row));
  }

  const auto runs = config.output_dir / "runs";
  const auto base = job.tag + "_rep" + std::to_string(job.repetition);
  out.files = {runs / (base + ".csv"), runs / (base + "_trajectories.csv")};
  write_file(out.files[0], eval_csv.str());
  write_file(out.files[1], traj_csv.str());
  return out;
}

std::vector<Job> plan_jobs(const ExperimentConfig& config) {
  const auto thresholds = threshold_pairs(config);
  const bool airfoil = config.dataset.family == DatasetFamily::Airfoil;
  const std::vector<int> dims = airfoil ? std::vector<int>{2 * config.dataset.airfoil_points} : config.dataset.d;
  std::vector<Job> jobs;
  for (const auto& [dx, dy] : thresholds) {
    std::string label = family_name(config.dataset.family);
    if (thresholds.size() > 1) label += "_dx" + csv::format(dx) + "_dy" + csv::format(dy);
    for (int n : config.dataset.n)
      for (int d : dims)
        for (int r = 0; r < config.repetitions; ++r) {
          Job j;
          j.n = n;
          j.d = d;
          j.delta_x = dx;
          j.delta_y = dy;
          j.repetition = r;
          j.dataset_label = label;
          j.tag = label + "_n" + std::to_string(n) + "_d" + std::to_string(d);
          jobs.push_back(std::move(j));
        }
  }
  return jobs;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir / "runs", ec);
  if (ec) throw IoError("cannot create " + (config.output_dir / "runs").string() + ": " + ec.message());

  const std::vector<Job> jobs = plan_jobs(config);
  std::vector<JobOutput> outputs(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  auto work = [&](std::size_t k) {
    try {
      outputs[k] = run_job(config, jobs[k]);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), jobs.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < jobs.size(); ++k) work(k);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < jobs.size(); k += workers) work(k);
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentResult result;
  for (auto& o : outputs) {
    result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
    result.files.insert(result.files.end(), o.files.begin(), o.files.end());
  }
  result.summary = summarize(result.rows);

  std::ostringstream results_csv, summary_csv;
  write_eval_csv_header(results_csv);
  for (const auto& row : result.rows) write_eval_csv_row(results_csv, row);
  write_summary_csv(summary_csv, result.summary);
  result.files.push_back(config.output_dir / "results.csv");
  write_file(result.files.back(), results_csv.str());
  result.files.push_back(config.output_dir / "summary.csv");
  write_file(result.files.back(), summary_csv.str());
  return result;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const EmptyMatchError*>(&e)) return 3;
  if (dynamic_cast<const NonFiniteError*>(&e)) return 4;
  return 1;
}

// ---------------------------------------------------------------------------
// Airfoil exchange
// ---------------------------------------------------------------------------

std::vector<std::filesystem::path> export_airfoil_shapes(const std::filesystem::path& dir, const DesignSet& designs) {
  if (designs.dim() < 4 || designs.dim() % 2 != 0)
    throw DimensionError("airfoil designs need an even number of coordinates, got " + std::to_string(designs.dim()));
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> files;
  std::ostringstream manifest;
  manifest << "shape_id,file\n";
  for (Eigen::Index i = 0; i < designs.size(); ++i) {
    const std::string name = "shape_" + std::to_string(i) + ".csv";
    std::ostringstream shape;
    write_airfoil_csv(shape, designs.design(i));
    files.push_back(dir / name);
    write_file(files.back(), shape.str());
    manifest << i << ',' << name << '\n';
  }
  files.push_back(dir / "manifest.csv");
  write_file(files.back(), manifest.str());
  return files;
}

AirfoilImport import_airfoil_properties(const DesignSet& designs, std::istream& values) {
  std::string line;
  if (!std::getline(values, line) || csv::trim(line) != "shape_id,value")
    throw IoError("import file must start with the header 'shape_id,value'");
  std::vector<std::optional<double>> value(static_cast<std::size_t>(designs.size()));
  std::vector<long> bad;
  long line_no = 1;
  while (std::getline(values, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    try {
      if (f.size() != 2) throw InvalidArgument("field count");
      const long id = csv::parse_long(f[0]);
      const double v = csv::parse_double(f[1]);
      if (id < 0 || id >= designs.size() || value[static_cast<std::size_t>(id)] || !std::isfinite(v))
        throw InvalidArgument("id or value");
      value[static_cast<std::size_t>(id)] = v;
    } catch (const InvalidArgument&) {
      bad.push_back(line_no);
    }
  }
  if (!bad.empty()) {
    std::string msg = "malformed import lines:";
    for (long b : bad) msg += ' ' + std::to_string(b);
    throw IoError(msg);
  }

  AirfoilImport out;
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i]) {
      rows.push_back(static_cast<Eigen::Index>(i));
      out.shape_ids.push_back(static_cast<long>(i));
    } else {
      out.missing_ids.push_back(static_cast<long>(i));
    }
  }
  out.data = designs.subset(rows);
  for (std::size_t k = 0; k < rows.size(); ++k)
    out.data.properties[static_cast<Eigen::Index>(k)] = *value[static_cast<std::size_t>(rows[k])];
  return out;
}

}  // namespace propen
