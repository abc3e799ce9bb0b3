#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "propen/baseline.hpp"
#include "propen/datasets.hpp"
#include "propen/eval.hpp"
#include "propen/matching.hpp"
#include "propen/neural.hpp"
#include "propen/propen.hpp"

namespace propen {

enum class DatasetFamily { EightGaussians, Pinwheel, Airfoil };

struct DatasetSpec {
  DatasetFamily family = DatasetFamily::EightGaussians;
  std::vector<int> n{200};  // several values sweep
  std::vector<int> d{10};   // toy only; airfoil dimension is 2 * airfoil_points
  double noise = 0.1;
  double kde_bandwidth = 0.01;
  int airfoil_points = 200;
  AirfoilRanges airfoil_ranges;
};

/// One complete experiment: every (n, d, delta_x, delta_y) grid point runs
/// `repetitions` times, each repetition with data seed `seed + r`.
struct ExperimentConfig {
  std::string name = "experiment";
  int repetitions = 10;
  double holdout_fraction = 0.2;
  std::filesystem::path output_dir = "results";
  std::uint64_t seed = 0;
  int threads = 1;

  DatasetSpec dataset;
  std::vector<double> delta_x{1.0};
  std::vector<double> delta_y{1.0};
  double delta_y_lower = 0.0;
  // propen_x2x, propen_xy2xy, propen_mix_x2x, propen_mix_xy2xy, explicit
  std::vector<std::string> methods{"propen_x2x", "propen_xy2xy", "propen_mix_x2x", "propen_mix_xy2xy", "explicit"};
  double mix_beta = 1.0;
  ArchSpec arch;
  TrainConfig train;
  OptimizeConfig optimize;
  GuidanceConfig guidance;
  double tolerance = 1e-6;  // uniqueness / novelty

  // Toy or airfoil defaults for architecture, training and matching.
  static ExperimentConfig defaults(DatasetFamily family);

  // Throws ConfigError naming the offending field.
  void validate() const;
};

const char* family_name(DatasetFamily family);

// INI text: [section] headers, key = value lines, ';' or '#' comments. Lists
// are comma separated. Unknown sections or keys are errors. Keys not given
// keep the defaults of [dataset] family.
ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ExperimentResult {
  std::vector<EvalRow> rows;
  std::vector<SummaryRow> summary;
  std::vector<std::filesystem::path> files;  // every file written
};

// Runs the full grid and writes, under output_dir:
//   runs/<tag>_rep<r>.csv               evaluation rows of one repetition
//   runs/<tag>_rep<r>_trajectories.csv  every optimization trajectory
//   results.csv                         all evaluation rows
//   summary.csv                         mean and std per (method, dataset, n, d)
// Throws ConfigError, EmptyMatchError, NonFiniteError or IoError.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Maps an exception from run_experiment to the CLI exit code
// (2 config, 3 empty matched set, 4 non-finite training, 1 anything else).
int exit_code_for(const std::exception& e);

// ---------------------------------------------------------------------------
// External airfoil evaluation exchange
// ---------------------------------------------------------------------------

// Writes shape_<id>.csv ("x,y" per point) for every design row and a
// manifest.csv with columns "shape_id,file".
std::vector<std::filesystem::path> export_airfoil_shapes(const std::filesystem::path& dir, const DesignSet& designs);

struct AirfoilImport {
  DesignSet data;                    // designs with an imported value
  std::vector<long> shape_ids;       // original row of each kept design
  std::vector<long> missing_ids;     // rows without a value, excluded
};

// Reads "shape_id,value" rows and assigns the values to designs. Throws
// IoError listing every malformed line (bad numbers, unknown or duplicate ids).
AirfoilImport import_airfoil_properties(const DesignSet& designs, std::istream& values);

}  // namespace propen
