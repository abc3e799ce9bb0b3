#include "propen/propen_c.h"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "propen/datasets.hpp"
#include "propen/error.hpp"
#include "propen/experiment.hpp"
#include "propen/matching.hpp"
#include "propen/propen.hpp"
#include "propen/theory.hpp"

struct propen_design_set {
  std::shared_ptr<const propen::DesignSet> data;
};

struct propen_matched_set {
  propen::MatchedDataset matched;
};

struct propen_model {
  propen::PropEnModel model;
};

namespace {

thread_local std::string g_last_error;

propen_status fail(propen_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

template <typename F>
propen_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return PROPEN_OK;
  } catch (const propen::ConfigError& e) {
    return fail(PROPEN_ERR_CONFIG, e.what());
  } catch (const propen::EmptyMatchError& e) {
    return fail(PROPEN_ERR_EMPTY_MATCH, e.what());
  } catch (const propen::NonFiniteError& e) {
    return fail(PROPEN_ERR_NON_FINITE, e.what());
  } catch (const propen::DimensionError& e) {
    return fail(PROPEN_ERR_DIMENSION, e.what());
  } catch (const propen::InvalidArgument& e) {
    return fail(PROPEN_ERR_INVALID_ARGUMENT, e.what());
  } catch (const propen::IoError& e) {
    return fail(PROPEN_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(PROPEN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(PROPEN_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* name) {
  if (!p) throw propen::InvalidArgument(std::string(name) + " must not be null");
}

std::ofstream open_out(const char* path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw propen::IoError(std::string("cannot open ") + path + " for writing");
  return out;
}

}  // namespace

extern "C" {

const char* propen_last_error(void) { return g_last_error.c_str(); }

const char* propen_version(void) { return "0.1.0"; }

propen_status propen_design_set_create(const double* designs, const double* properties, size_t n, size_t m,
                                       propen_design_set** out) {
  return guarded([&] {
    require(out, "out");
    require(designs, "designs");
    if (n == 0 || m == 0) throw propen::InvalidArgument("design set needs n > 0 and m > 0");
    auto set = std::make_shared<propen::DesignSet>();
    set->designs = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        designs, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    set->properties = properties ? Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(properties, static_cast<Eigen::Index>(n)))
                                 : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    set->validate();
    *out = new propen_design_set{std::move(set)};
  });
}

propen_status propen_design_set_read_csv(const char* path, propen_design_set** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new propen_design_set{std::make_shared<propen::DesignSet>(propen::read_design_set_csv(path))};
  });
}

propen_status propen_design_set_write_csv(const propen_design_set* set, const char* path) {
  return guarded([&] {
    require(set, "set");
    require(path, "path");
    propen::write_design_set_csv(std::filesystem::path(path), *set->data);
  });
}

propen_status propen_design_set_shape(const propen_design_set* set, size_t* n, size_t* m) {
  return guarded([&] {
    require(set, "set");
    if (n) *n = static_cast<size_t>(set->data->size());
    if (m) *m = static_cast<size_t>(set->data->dim());
  });
}

propen_status propen_design_set_row(const propen_design_set* set, size_t i, double* design, double* property) {
  return guarded([&] {
    require(set, "set");
    if (i >= static_cast<size_t>(set->data->size())) throw propen::InvalidArgument("row index out of range");
    const auto row = static_cast<Eigen::Index>(i);
    if (design)
      for (Eigen::Index c = 0; c < set->data->dim(); ++c) design[c] = set->data->designs(row, c);
    if (property) *property = set->data->properties[row];
  });
}

void propen_design_set_free(propen_design_set* set) { delete set; }

propen_status propen_match(const propen_design_set* set, double delta_x, double delta_y, double delta_y_lower,
                           propen_matched_set** out) {
  return guarded([&] {
    require(set, "set");
    require(out, "out");
    const propen::MatchConfig config{delta_x, delta_y, delta_y_lower};
    *out = new propen_matched_set{propen::build_matched_dataset(set->data, config)};
  });
}

propen_status propen_matched_set_size(const propen_matched_set* matched, size_t* count) {
  return guarded([&] {
    require(matched, "matched");
    require(count, "count");
    *count = matched->matched.size();
  });
}

propen_status propen_matched_set_pair(const propen_matched_set* matched, size_t k, size_t* source, size_t* target) {
  return guarded([&] {
    require(matched, "matched");
    if (k >= matched->matched.size()) throw propen::InvalidArgument("pair index out of range");
    if (source) *source = static_cast<size_t>(matched->matched.pairs[k].source);
    if (target) *target = static_cast<size_t>(matched->matched.pairs[k].target);
  });
}

propen_status propen_matched_set_write_csv(const propen_matched_set* matched, const char* path) {
  return guarded([&] {
    require(matched, "matched");
    if (path) propen::write_matched_csv(std::filesystem::path(path), matched->matched);
    else propen::write_matched_csv(std::cout, matched->matched);
  });
}

void propen_matched_set_free(propen_matched_set* matched) { delete matched; }

void propen_train_options_default(propen_train_options* options) {
  if (!options) return;
  const propen::TrainConfig tc;
  const propen::ArchSpec arch;
  *options = propen_train_options{0, 0.0, nullptr, 0, arch.latent_dim, tc.epochs, tc.batch_size, tc.learning_rate, 0};
}

propen_status propen_train(const propen_matched_set* matched, const propen_train_options* options,
                           propen_model** out) {
  return guarded([&] {
    require(matched, "matched");
    require(out, "out");
    propen_train_options opts;
    propen_train_options_default(&opts);
    if (options) opts = *options;
    propen::ArchSpec arch;
    if (opts.hidden) arch.hidden_widths.assign(opts.hidden, opts.hidden + opts.n_hidden);
    arch.latent_dim = opts.latent;
    propen::TrainConfig tc;
    tc.epochs = opts.epochs;
    tc.batch_size = opts.batch_size;
    tc.learning_rate = opts.learning_rate;
    tc.rng_seed = opts.seed;
    const propen::PropEnVariant variant{opts.xy2xy ? propen::IoMode::XY2XY : propen::IoMode::X2X, opts.mix_beta};
    *out = new propen_model{propen::train_propen(matched->matched, variant, arch, tc).model};
  });
}

propen_status propen_model_save(const propen_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    auto out = open_out(path);
    propen::write_propen_model(out, model->model);
  });
}

propen_status propen_model_load(const char* path, propen_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw propen::IoError(std::string("cannot open ") + path);
    *out = new propen_model{propen::read_propen_model(in)};
  });
}

propen_status propen_model_dim(const propen_model* model, size_t* dim) {
  return guarded([&] {
    require(model, "model");
    require(dim, "dim");
    *dim = static_cast<size_t>(model->model.design_dim());
  });
}

void propen_model_free(propen_model* model) { delete model; }

propen_status propen_optimize(const propen_model* model, const double* seed, size_t dim, double seed_property,
                              int max_steps, double convergence_eps, double* final_design, int* steps_taken) {
  return guarded([&] {
    require(model, "model");
    require(seed, "seed");
    require(final_design, "final_design");
    const propen::OptimizeConfig config{max_steps, convergence_eps, false};
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(seed, static_cast<Eigen::Index>(dim));
    const propen::Trajectory t = propen::optimize(model->model, x, config, {}, seed_property);
    if (t.aborted()) throw propen::NonFiniteError(t.diagnostic);
    Eigen::Map<Eigen::VectorXd>(final_design, static_cast<Eigen::Index>(dim)) = t.final_state();
    if (steps_taken) *steps_taken = t.steps_taken;
  });
}

propen_status propen_optimize_csv(const propen_model* model, const char* seeds_path, const char* out_path,
                                  int max_steps, double convergence_eps) {
  return guarded([&] {
    require(model, "model");
    require(seeds_path, "seeds_path");
    const propen::DesignSet seeds = propen::read_design_set_csv(std::filesystem::path(seeds_path));
    const propen::OptimizeConfig config{max_steps, convergence_eps, true};
    std::ofstream file;
    if (out_path) file = open_out(out_path);
    std::ostream& out = out_path ? static_cast<std::ostream&>(file) : std::cout;
    propen::write_trajectory_csv_header(out, seeds.dim(), false);
    for (Eigen::Index i = 0; i < seeds.size(); ++i) {
      const propen::Trajectory t = propen::optimize(model->model, seeds.design(i), config, {}, seeds.properties[i]);
      propen::write_trajectory_csv_rows(out, t, static_cast<long>(i));
    }
    if (!out) throw propen::IoError("failed writing trajectories");
  });
}

propen_status propen_run_experiment(const char* config_path, const char* output_dir) {
  return guarded([&] {
    require(config_path, "config_path");
    propen::ExperimentConfig config = propen::load_experiment_config(config_path);
    if (output_dir && *output_dir) config.output_dir = output_dir;
    propen::run_experiment(config);
  });
}

propen_status propen_check_theory(const char* which, const char* out_path, uint64_t seed, int* failures) {
  return guarded([&] {
    require(which, "which");
    std::ofstream file;
    if (out_path) file = open_out(out_path);
    std::ostream& out = out_path ? static_cast<std::ostream&>(file) : std::cout;
    const int f = propen::run_theory_checks(which, out, seed);
    if (failures) *failures = f;
  });
}

propen_status propen_naca(double m, double p, double t, int n_points, int closed_trailing_edge, double* coords,
                          size_t capacity) {
  return guarded([&] {
    require(coords, "coords");
    propen::NacaParams params;
    params.m_camber = m;
    params.p_pos = p;
    params.t_thick = t;
    params.n_points = n_points;
    params.closed_trailing_edge = closed_trailing_edge != 0;
    params.validate();
    if (capacity < 2 * static_cast<size_t>(n_points)) throw propen::InvalidArgument("coords capacity below 2 * n_points");
    const Eigen::VectorXd v = propen::generate_naca(params);
    std::copy(v.data(), v.data() + v.size(), coords);
  });
}

propen_status propen_airfoil_generate(int n_shapes, int n_points, uint64_t seed, propen_design_set** out) {
  return guarded([&] {
    require(out, "out");
    if (n_points < 4 || n_points % 2 != 0) throw propen::ConfigError("naca.n: must be an even integer >= 4");
    auto data = std::make_shared<propen::DesignSet>(propen::generate_airfoil_dataset(n_shapes, seed, n_points).designs);
    for (Eigen::Index i = 0; i < data->size(); ++i)
      data->properties[i] = propen::synthetic_airfoil_property(data->design(i));
    *out = new propen_design_set{std::move(data)};
  });
}

propen_status propen_airfoil_export(const propen_design_set* set, const char* dir) {
  return guarded([&] {
    require(set, "set");
    require(dir, "dir");
    propen::export_airfoil_shapes(dir, *set->data);
  });
}

propen_status propen_airfoil_import(const propen_design_set* set, const char* values_path, propen_design_set** out,
                                    size_t* n_missing) {
  return guarded([&] {
    require(set, "set");
    require(values_path, "values_path");
    require(out, "out");
    std::ifstream in(values_path);
    if (!in) throw propen::IoError(std::string("cannot open ") + values_path);
    propen::AirfoilImport imported = propen::import_airfoil_properties(*set->data, in);
    if (n_missing) *n_missing = imported.missing_ids.size();
    *out = new propen_design_set{std::make_shared<propen::DesignSet>(std::move(imported.data))};
  });
}

}  // extern "C"
