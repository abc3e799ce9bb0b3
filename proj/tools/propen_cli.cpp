// Command line front end. Talks to the library only through propen_c.h.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "propen/propen_c.h"

namespace {

int report(propen_status status) {
  if (status == PROPEN_OK) return 0;
  std::fprintf(stderr, "propen: %s\n", propen_last_error());
  if (status == PROPEN_ERR_CONFIG || status == PROPEN_ERR_EMPTY_MATCH || status == PROPEN_ERR_NON_FINITE)
    return static_cast<int>(status);
  return 1;
}

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

struct DesignSetGuard {
  propen_design_set* p = nullptr;
  ~DesignSetGuard() { propen_design_set_free(p); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Property-guided design enhancement"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment config (output dir: PROPEN_OUTPUT_DIR overrides)");
  run->add_option("config", config_path, "INI config file")->required()->check(CLI::ExistingFile);

  std::string data_path, out_path;
  double dx = 1.0, dy = 1.0, dy_lower = 0.0;
  auto* match = app.add_subcommand("match", "Write the matched pairs of a design CSV");
  match->add_option("data", data_path, "Design CSV (x0..x{m-1},y)")->required()->check(CLI::ExistingFile);
  match->add_option("--dx", dx, "Squared distance threshold");
  match->add_option("--dy", dy, "Upper property gap");
  match->add_option("--dy-lower", dy_lower, "Lower property gap (exclusive)");
  match->add_option("-o,--output", out_path, "Output CSV (default stdout)");

  propen_train_options topts;
  propen_train_options_default(&topts);
  std::string mode = "x2x";
  std::vector<int> hidden{30, 30};
  std::uint64_t seed = 0;
  auto* train = app.add_subcommand("train", "Match a design CSV and train a model on the pairs");
  train->add_option("data", data_path, "Design CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--dx", dx, "Squared distance threshold");
  train->add_option("--dy", dy, "Upper property gap");
  train->add_option("--dy-lower", dy_lower, "Lower property gap (exclusive)");
  train->add_option("--mode", mode, "x2x or xy2xy")->check(CLI::IsMember({"x2x", "xy2xy"}));
  train->add_option("--mix-beta", topts.mix_beta, "Reconstruction regularizer weight");
  train->add_option("--hidden", hidden, "Hidden widths")->delimiter(',');
  train->add_option("--latent", topts.latent, "Bottleneck width");
  train->add_option("--epochs", topts.epochs, "Training epochs");
  train->add_option("--batch-size", topts.batch_size, "Minibatch size");
  train->add_option("--lr", topts.learning_rate, "Adam learning rate");
  train->add_option("--seed", seed, "RNG seed");
  train->add_option("-o,--output", out_path, "Model file")->required();

  std::string model_path, seeds_path;
  int max_steps = 30;
  double eps = 1e-4;
  auto* opt = app.add_subcommand("optimize", "Iterate a trained model from every seed design");
  opt->add_option("model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  opt->add_option("seeds", seeds_path, "Seed design CSV")->required()->check(CLI::ExistingFile);
  opt->add_option("--max-steps", max_steps, "Iteration cap");
  opt->add_option("--eps", eps, "Convergence threshold on the step norm");
  opt->add_option("-o,--output", out_path, "Trajectory CSV (default stdout)");

  std::string which;
  auto* theory = app.add_subcommand("check-theory", "Run the theory oracles and print check,instance,lhs,rhs,holds");
  theory->add_option("which", which, "thm1, thm2, corollary, colinearity or all")
      ->required()
      ->check(CLI::IsMember({"thm1", "thm2", "corollary", "colinearity", "all"}));
  theory->add_option("--seed", seed, "RNG seed");
  theory->add_option("-o,--output", out_path, "Output CSV (default stdout)");

  double m = 0.0, p = 0.4, t = 0.12;
  int n_points = 200;
  bool open_te = false;
  auto* naca = app.add_subcommand("naca", "Print NACA 4-digit coordinates as x,y CSV");
  naca->add_option("--m", m, "Max camber / chord");
  naca->add_option("--p", p, "Position of max camber / chord");
  naca->add_option("--t", t, "Max thickness / chord");
  naca->add_option("--n", n_points, "Number of points (even)");
  naca->add_flag("--open-te", open_te, "Classic open trailing edge coefficient");

  int n_shapes = 200;
  std::string dir;
  auto* exp = app.add_subcommand("airfoil-export", "Generate NACA shapes and export them for external evaluation");
  exp->add_option("dir", dir, "Output directory")->required();
  exp->add_option("--shapes", n_shapes, "Number of shapes");
  exp->add_option("--n", n_points, "Points per shape");
  exp->add_option("--seed", seed, "RNG seed");

  std::string values_path;
  auto* imp = app.add_subcommand("airfoil-import", "Attach externally computed values to exported shapes");
  imp->add_option("designs", data_path, "designs.csv written by airfoil-export")->required()->check(CLI::ExistingFile);
  imp->add_option("values", values_path, "CSV with shape_id,value rows")->required()->check(CLI::ExistingFile);
  imp->add_option("-o,--output", out_path, "Design CSV with imported properties")->required();

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    const char* env = std::getenv("PROPEN_OUTPUT_DIR");
    return report(propen_run_experiment(config_path.c_str(), env));
  }

  if (*match || *train) {
    DesignSetGuard data;
    if (int rc = report(propen_design_set_read_csv(data_path.c_str(), &data.p))) return rc;
    propen_matched_set* matched = nullptr;
    if (int rc = report(propen_match(data.p, dx, dy, dy_lower, &matched))) return rc;
    int rc = 0;
    if (*match) {
      rc = report(propen_matched_set_write_csv(matched, or_null(out_path)));
    } else {
      topts.xy2xy = mode == "xy2xy" ? 1 : 0;
      topts.hidden = hidden.data();
      topts.n_hidden = hidden.size();
      topts.seed = seed;
      propen_model* model = nullptr;
      rc = report(propen_train(matched, &topts, &model));
      if (rc == 0) rc = report(propen_model_save(model, out_path.c_str()));
      propen_model_free(model);
    }
    propen_matched_set_free(matched);
    return rc;
  }

  if (*opt) {
    propen_model* model = nullptr;
    if (int rc = report(propen_model_load(model_path.c_str(), &model))) return rc;
    const int rc = report(propen_optimize_csv(model, seeds_path.c_str(), or_null(out_path), max_steps, eps));
    propen_model_free(model);
    return rc;
  }

  if (*theory) {
    int failures = 0;
    if (int rc = report(propen_check_theory(which.c_str(), or_null(out_path), seed, &failures))) return rc;
    if (failures > 0) std::fprintf(stderr, "propen: %d check(s) did not hold\n", failures);
    return failures > 0 ? 1 : 0;
  }

  if (*naca) {
    std::vector<double> coords(2 * static_cast<std::size_t>(n_points > 0 ? n_points : 0));
    if (int rc = report(propen_naca(m, p, t, n_points, open_te ? 0 : 1, coords.data(), coords.size()))) return rc;
    std::printf("x,y\n");
    for (std::size_t i = 0; i + 1 < coords.size(); i += 2) std::printf("%.17g,%.17g\n", coords[i], coords[i + 1]);
    return 0;
  }

  if (*exp) {
    DesignSetGuard data;
    if (int rc = report(propen_airfoil_generate(n_shapes, n_points, seed, &data.p))) return rc;
    if (int rc = report(propen_airfoil_export(data.p, dir.c_str()))) return rc;
    const std::string designs = (std::filesystem::path(dir) / "designs.csv").string();
    return report(propen_design_set_write_csv(data.p, designs.c_str()));
  }

  if (*imp) {
    DesignSetGuard data, imported;
    if (int rc = report(propen_design_set_read_csv(data_path.c_str(), &data.p))) return rc;
    std::size_t missing = 0;
    if (int rc = report(propen_airfoil_import(data.p, values_path.c_str(), &imported.p, &missing))) return rc;
    if (missing > 0) std::fprintf(stderr, "propen: %zu shape(s) without a value were excluded\n", missing);
    return report(propen_design_set_write_csv(imported.p, out_path.c_str()));
  }
  return 0;
}
