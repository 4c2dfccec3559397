/* C interface to the polarized photon transport library. */
#ifndef POLMC_POLMC_H
#define POLMC_POLMC_H

#include <stddef.h>
#include <stdint.h>

#if defined(POLMC_BUILDING_LIBRARY)
#define POLMC_API __attribute__((visibility("default")))
#else
#define POLMC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum polmc_status {
  POLMC_OK = 0,
  POLMC_ERR_VALIDATION = 1, /* bad argument or configuration */
  POLMC_ERR_FORMAT = 2,     /* corrupt or unsupported file */
  POLMC_ERR_RUNTIME = 3,    /* numerical or I/O failure during work */
  POLMC_ERR_NULL = 4,       /* required pointer was NULL */
  POLMC_ERR_RANGE = 5,      /* index or buffer size out of range */
  POLMC_ERR_INTERNAL = 6
} polmc_status;

typedef struct polmc_config polmc_config;
typedef struct polmc_result polmc_result;
typedef struct polmc_grid polmc_grid;
typedef struct polmc_mie_table polmc_mie_table;
typedef struct polmc_dataset polmc_dataset;
typedef struct polmc_model polmc_model;

/* Message for the most recent failure on the calling thread. */
POLMC_API const char *polmc_last_error(void);
POLMC_API const char *polmc_status_string(polmc_status status);
POLMC_API const char *polmc_version(void);
/* Releases strings returned through char** out-parameters. */
POLMC_API void polmc_string_free(char *s);

/* ---- configuration ---- */
POLMC_API polmc_status polmc_config_default(polmc_config **out);
POLMC_API polmc_status polmc_config_from_json(const char *json, polmc_config **out);
POLMC_API polmc_status polmc_config_from_file(const char *path, polmc_config **out);
/* Merges a JSON object of overrides, e.g. {"n_photons": 1000}. */
POLMC_API polmc_status polmc_config_apply_json(polmc_config *config, const char *json);
POLMC_API polmc_status polmc_config_set_photons(polmc_config *config, uint64_t n);
POLMC_API polmc_status polmc_config_set_seed(polmc_config *config, uint64_t seed);
POLMC_API polmc_status polmc_config_set_workers(polmc_config *config, unsigned n);
POLMC_API polmc_status polmc_config_validate(const polmc_config *config);
POLMC_API polmc_status polmc_config_to_json(const polmc_config *config, char **out);
POLMC_API polmc_status polmc_config_hash(const polmc_config *config, uint64_t *out);
POLMC_API void polmc_config_free(polmc_config *config);

/* ---- simulation ---- */
typedef struct polmc_ledger {
  double launched;
  double detected_top;
  double detected_bottom;
  double absorbed;
  double terminated;
} polmc_ledger;

POLMC_API polmc_status polmc_simulate(const polmc_config *config, polmc_result **out);
POLMC_API polmc_status polmc_result_ledger(const polmc_result *result, polmc_ledger *out);
/* which: 0 = analog top exits, 1 = partial-photon estimates. Returns a copy. */
POLMC_API polmc_status polmc_result_grid(const polmc_result *result, int which,
                                         polmc_grid **out);
POLMC_API polmc_status polmc_result_summary_json(const polmc_result *result, char **out);
POLMC_API polmc_status polmc_result_coherent_reflectance(const polmc_result *result,
                                                         double *mean, double *std_error);
POLMC_API void polmc_result_free(polmc_result *result);

/* ---- detector grids ---- */
POLMC_API polmc_status polmc_grid_read_file(const char *path, polmc_grid **out);
POLMC_API polmc_status polmc_grid_write_file(const polmc_grid *grid, const char *path);
POLMC_API polmc_status polmc_grid_write_csv(const polmc_grid *grid, const char *path);
POLMC_API polmc_status polmc_grid_dims(const polmc_grid *grid, uint32_t *n_radius,
                                       uint32_t *n_depth, double *radius_width,
                                       double *depth_width);
POLMC_API polmc_status polmc_grid_total_weight(const polmc_grid *grid, double *out);
/* 64-bit FNV-1a of the serialized grid. */
POLMC_API polmc_status polmc_grid_checksum(const polmc_grid *grid, uint64_t *out);
/* Channel names: weight, intensity, pxx, pxy, ppp, ppm, pxy_doc, ppm_doc, doc,
 * count. Fills n_depth * n_radius values, depth-major. */
POLMC_API polmc_status polmc_grid_image(const polmc_grid *grid, const char *channel,
                                        double *values, size_t length);
/* Writes a binary graymap; reports the scaling range. */
POLMC_API polmc_status polmc_grid_write_pgm(const polmc_grid *grid, const char *channel,
                                            const char *path, double *min, double *max);
/* Co-polarized fraction per depth bin in one radius column (NaN if empty). */
POLMC_API polmc_status polmc_grid_co_fraction(const polmc_grid *grid, uint32_t radius_bin,
                                              int circular, double *values, size_t length);
POLMC_API void polmc_grid_free(polmc_grid *grid);

/* ---- scattering tables ---- */
typedef struct polmc_mie_info {
  double size_param;
  double rel_index_re;
  double rel_index_im;
  double q_ext;
  double q_sca;
  double asymmetry;
  double phase_norm;
  double mu_s;
  uint32_t n_terms;
  uint32_t n_theta;
} polmc_mie_info;

POLMC_API polmc_status polmc_mie_table_build(const polmc_config *config, int n_theta,
                                             polmc_mie_table **out);
POLMC_API polmc_status polmc_mie_table_info(const polmc_mie_table *table, polmc_mie_info *out);
/* Row i: theta (rad), S11, S12, and the complex S1, S2. */
POLMC_API polmc_status polmc_mie_table_row(const polmc_mie_table *table, size_t i,
                                           double row[7]);
POLMC_API void polmc_mie_table_free(polmc_mie_table *table);

/* ---- reflectance validation ---- */
typedef struct polmc_reflectance_row {
  double theta_deg;
  double r_theory;
  double r_sim;
  double std_error;
} polmc_reflectance_row;

POLMC_API polmc_status polmc_validate_reflectance(const polmc_config *base,
                                                  const double *angles_deg, size_t n,
                                                  polmc_reflectance_row *rows);

/* ---- datasets ---- */
/* ranges: comma-separated name:lo:hi, e.g. "n_particle:1.1:1.5". */
POLMC_API polmc_status polmc_dataset_generate(const polmc_config *base, const char *ranges,
                                              uint32_t n_samples, uint64_t seed,
                                              uint32_t feature_rows, uint32_t feature_cols,
                                              polmc_dataset **out, uint32_t *failed);
POLMC_API polmc_status polmc_dataset_read_file(const char *path, polmc_dataset **out);
POLMC_API polmc_status polmc_dataset_write_file(const polmc_dataset *data, const char *path);
POLMC_API polmc_status polmc_dataset_write_csv(const polmc_dataset *data, const char *path);
POLMC_API polmc_status polmc_dataset_size(const polmc_dataset *data, size_t *samples,
                                          size_t *features, size_t *targets);
POLMC_API void polmc_dataset_free(polmc_dataset *data);

/* ---- network ---- */
typedef struct polmc_train_options {
  uint32_t epochs;   /* used when steps == 0 */
  uint64_t steps;
  uint32_t batch_size;
  uint64_t seed;
  double learning_rate;
  double train_fraction;
  uint32_t width;
  uint32_t n_blocks;
  uint32_t latent_dim;
  int variational;
} polmc_train_options;

typedef struct polmc_train_report {
  double initial_validation;
  double final_validation;
  double best_validation;
  uint64_t best_step;
  uint64_t steps;
  double heldout_mae; /* first target, original units */
  size_t train_samples;
  size_t test_samples;
} polmc_train_report;

POLMC_API void polmc_train_options_default(polmc_train_options *out);
/* Splits, normalizes on the training part, trains, writes the loss curves as
 * CSV to loss_csv_path when it is not NULL. */
POLMC_API polmc_status polmc_train(const polmc_dataset *data, const polmc_train_options *options,
                                   const char *loss_csv_path, polmc_model **out,
                                   polmc_train_report *report);
POLMC_API polmc_status polmc_model_read_file(const char *path, polmc_model **out);
POLMC_API polmc_status polmc_model_write_file(const polmc_model *model, const char *path);
POLMC_API polmc_status polmc_model_target_count(const polmc_model *model, size_t *out);
POLMC_API polmc_status polmc_model_target_name(const polmc_model *model, size_t i,
                                               const char **out);
/* launched <= 0 uses the training photon count. */
POLMC_API polmc_status polmc_infer(const polmc_model *model, const polmc_grid *grid,
                                   double launched, double *values, size_t length);
POLMC_API void polmc_model_free(polmc_model *model);

/* ---- pipeline ---- */
typedef struct polmc_pipeline_options {
  uint32_t n_samples;
  uint64_t photons;
  uint64_t steps;
  uint32_t batch_size;
  uint64_t seed;
  double lo;
  double hi;
  unsigned workers;
  const char *out_dir; /* NULL: nothing written */
} polmc_pipeline_options;

typedef struct polmc_pipeline_report {
  double heldout_mae;
  double initial_validation;
  double final_validation;
  double probe_truth;
  double probe_prediction;
  double seconds;
} polmc_pipeline_report;

POLMC_API void polmc_pipeline_options_default(polmc_pipeline_options *out);
/* Newline-separated plan; touches nothing. */
POLMC_API polmc_status polmc_pipeline_plan(const polmc_pipeline_options *options, char **out);
/* log may be NULL; it receives one line per stage. */
POLMC_API polmc_status polmc_pipeline_run(const polmc_pipeline_options *options,
                                          void (*log)(const char *line, void *user), void *user,
                                          polmc_pipeline_report *report);

#ifdef __cplusplus
}
#endif

#endif
