#ifndef PROPEN_C_H
#define PROPEN_C_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PROPEN_API __declspec(dllexport)
#else
#define PROPEN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Codes 2-4 double as process exit codes of the command line tool. */
typedef enum propen_status {
  PROPEN_OK = 0,
  PROPEN_ERR_INTERNAL = 1,
  PROPEN_ERR_CONFIG = 2,
  PROPEN_ERR_EMPTY_MATCH = 3,
  PROPEN_ERR_NON_FINITE = 4,
  PROPEN_ERR_INVALID_ARGUMENT = 5,
  PROPEN_ERR_DIMENSION = 6,
  PROPEN_ERR_IO = 7
} propen_status;

typedef struct propen_design_set propen_design_set;
typedef struct propen_matched_set propen_matched_set;
typedef struct propen_model propen_model;

/* Message of the last failed call on this thread; empty after success. */
PROPEN_API const char* propen_last_error(void);
PROPEN_API const char* propen_version(void);

/* Design sets: n designs of dimension m, row-major. properties may be NULL (zeros). */
PROPEN_API propen_status propen_design_set_create(const double* designs, const double* properties, size_t n,
                                                  size_t m, propen_design_set** out);
PROPEN_API propen_status propen_design_set_read_csv(const char* path, propen_design_set** out);
PROPEN_API propen_status propen_design_set_write_csv(const propen_design_set* set, const char* path);
PROPEN_API propen_status propen_design_set_shape(const propen_design_set* set, size_t* n, size_t* m);
PROPEN_API propen_status propen_design_set_row(const propen_design_set* set, size_t i, double* design,
                                               double* property);
PROPEN_API void propen_design_set_free(propen_design_set* set);

/* Matching. delta_x bounds the squared distance. */
PROPEN_API propen_status propen_match(const propen_design_set* set, double delta_x, double delta_y,
                                      double delta_y_lower, propen_matched_set** out);
PROPEN_API propen_status propen_matched_set_size(const propen_matched_set* matched, size_t* count);
PROPEN_API propen_status propen_matched_set_pair(const propen_matched_set* matched, size_t k, size_t* source,
                                                 size_t* target);
PROPEN_API propen_status propen_matched_set_write_csv(const propen_matched_set* matched, const char* path);
PROPEN_API void propen_matched_set_free(propen_matched_set* matched);

typedef struct propen_train_options {
  int xy2xy;           /* 0: designs only, 1: designs plus property */
  double mix_beta;     /* 0 disables the reconstruction regularizer */
  const int* hidden;   /* hidden widths, NULL for the default 30,30 */
  size_t n_hidden;
  int latent;
  int epochs;
  int batch_size;
  double learning_rate;
  uint64_t seed;
} propen_train_options;

PROPEN_API void propen_train_options_default(propen_train_options* options);
PROPEN_API propen_status propen_train(const propen_matched_set* matched, const propen_train_options* options,
                                      propen_model** out);
PROPEN_API propen_status propen_model_save(const propen_model* model, const char* path);
PROPEN_API propen_status propen_model_load(const char* path, propen_model** out);
PROPEN_API propen_status propen_model_dim(const propen_model* model, size_t* dim);
PROPEN_API void propen_model_free(propen_model* model);

/* Iterates the model from seed (length dim) and writes the final design. */
PROPEN_API propen_status propen_optimize(const propen_model* model, const double* seed, size_t dim,
                                         double seed_property, int max_steps, double convergence_eps,
                                         double* final_design, int* steps_taken);
/* Optimizes every row of a design CSV and writes the trajectories CSV
   (seed_id,step,x0..,property with blank property). out_path NULL = stdout. */
PROPEN_API propen_status propen_optimize_csv(const propen_model* model, const char* seeds_path,
                                             const char* out_path, int max_steps, double convergence_eps);

/* Runs an experiment config file. output_dir, when non-NULL, replaces the
   configured output directory. */
PROPEN_API propen_status propen_run_experiment(const char* config_path, const char* output_dir);

/* thm1, thm2, corollary, colinearity or all. out_path NULL = stdout.
   failures receives the number of rows with holds=false. */
PROPEN_API propen_status propen_check_theory(const char* which, const char* out_path, uint64_t seed,
                                             int* failures);

/* NACA 4-digit coordinates, 2 * n_points doubles interleaved x, y. */
PROPEN_API propen_status propen_naca(double m, double p, double t, int n_points, int closed_trailing_edge,
                                     double* coords, size_t capacity);

/* n random NACA shapes, properties from the built-in synthetic evaluator. */
PROPEN_API propen_status propen_airfoil_generate(int n_shapes, int n_points, uint64_t seed,
                                                 propen_design_set** out);
PROPEN_API propen_status propen_airfoil_export(const propen_design_set* set, const char* dir);
/* Replaces properties with "shape_id,value" rows; shapes without a value are
   dropped and counted in n_missing. */
PROPEN_API propen_status propen_airfoil_import(const propen_design_set* set, const char* values_path,
                                               propen_design_set** out, size_t* n_missing);

#ifdef __cplusplus
}
#endif

#endif
