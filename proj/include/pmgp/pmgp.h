#ifndef PMGP_PMGP_H
#define PMGP_PMGP_H

#include <stddef.h>
#include <stdint.h>

#if defined(PMGP_BUILDING_LIBRARY)
#define PMGP_API __attribute__((visibility("default")))
#else
#define PMGP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pmgp_status {
  PMGP_OK = 0,
  PMGP_ERR_INVALID_ARGUMENT = 1,
  PMGP_ERR_PARSE = 2,
  PMGP_ERR_CONFIG = 3,
  PMGP_ERR_ILL_CONDITIONED = 4,
  PMGP_ERR_SIMULATION = 5,
  PMGP_ERR_TRAINING = 6,
  PMGP_ERR_EVALUATION = 7,
  PMGP_ERR_IO = 8,
  PMGP_ERR_INTERNAL = 9
} pmgp_status;

typedef struct pmgp_mesh pmgp_mesh;
typedef struct pmgp_spectrum pmgp_spectrum;
typedef struct pmgp_field pmgp_field;
typedef struct pmgp_model pmgp_model;

typedef struct pmgp_hyperparams {
  double sigma_m;
  double l_s;
  double sigma_a;
  double l_t;
  double beta11;
  double beta21;
  double beta22;
  double sigma2_u_eps;
  double sigma2_v_eps;
} pmgp_hyperparams;

/* Message of the last failed call on this thread; empty after success. */
PMGP_API const char* pmgp_last_error(void);
PMGP_API const char* pmgp_status_name(pmgp_status status);
PMGP_API const char* pmgp_version(void);
/* Frees strings returned through char** out-parameters. */
PMGP_API void pmgp_string_free(char* s);

/* Hex FNV-1a digests. */
PMGP_API pmgp_status pmgp_hash_string(const char* text, char** hex_out);
PMGP_API pmgp_status pmgp_file_digest(const char* path, char** hex_out);

/* ---- meshes ---- */
PMGP_API pmgp_status pmgp_mesh_load(const char* path, pmgp_mesh** out);
PMGP_API pmgp_status pmgp_mesh_icosphere(int subdivisions, double radius, pmgp_mesh** out);
PMGP_API pmgp_status pmgp_mesh_save_off(const pmgp_mesh* mesh, const char* path);
PMGP_API pmgp_status pmgp_mesh_info(const pmgp_mesh* mesh, int64_t* n_vertices, int64_t* n_faces, double* diameter);
PMGP_API void pmgp_mesh_free(pmgp_mesh* mesh);

/* Laplace-Beltrami eigenpairs; k <= 0 picks the default mode count. */
PMGP_API pmgp_status pmgp_spectrum_compute(const pmgp_mesh* mesh, int64_t k, pmgp_spectrum** out);
PMGP_API pmgp_status pmgp_spectrum_modes(const pmgp_spectrum* spectrum, int64_t* k);
/* Copies min(capacity, k) eigenvalues. */
PMGP_API pmgp_status pmgp_spectrum_eigenvalues(const pmgp_spectrum* spectrum, double* out, int64_t capacity);
PMGP_API void pmgp_spectrum_free(pmgp_spectrum* spectrum);

/* ---- fields: (task, vertex, time) arrays, time fastest in memory ---- */
/* header_json (optional) receives {vertex_count, seed, config_hash}. */
PMGP_API pmgp_status pmgp_field_read(const char* path, pmgp_field** out, char** header_json);
/* header_json may be NULL; otherwise {vertex_count, seed, config_hash}. */
PMGP_API pmgp_status pmgp_field_write(const pmgp_field* field, const char* path, const char* header_json);
PMGP_API pmgp_status pmgp_field_write_csv(const pmgp_field* field, const char* path);
/* dims = {n_tasks, n_vertices, n_times}. */
PMGP_API pmgp_status pmgp_field_dims(const pmgp_field* field, int64_t dims[3]);
/* {tasks, space_ids, times}. */
PMGP_API pmgp_status pmgp_field_index_json(const pmgp_field* field, char** json_out);
PMGP_API pmgp_status pmgp_field_values(const pmgp_field* field, double* out, int64_t capacity);
PMGP_API void pmgp_field_free(pmgp_field* field);

/* ---- simulation and data preparation ---- */
/* config_json: the simulate section (protocol, dt, n_steps, record_stride, fhn, ...).
   resolved_json (optional) receives the fully materialized configuration. */
PMGP_API pmgp_status pmgp_simulate(const pmgp_mesh* mesh, const char* config_json, pmgp_field** out,
                                   char** resolved_json);
PMGP_API pmgp_status pmgp_add_noise(const pmgp_field* field, double sigma, uint64_t seed, pmgp_field** out);
PMGP_API pmgp_status pmgp_subsample(const pmgp_field* field, int64_t picks, int time_stride, uint64_t seed,
                                    pmgp_field** out);
PMGP_API pmgp_status pmgp_subsample_vertices(const pmgp_field* field, const int* vertices, int64_t n,
                                             int time_stride, pmgp_field** out);
/* re = {RE_u, RE_v, RE_total}. */
PMGP_API pmgp_status pmgp_relative_error(const pmgp_field* prediction, const pmgp_field* truth, double re[3]);

/* ---- training ---- */
/* config_json: the train section. On PMGP_ERR_TRAINING the report is still
   returned when all restarts failed. */
PMGP_API pmgp_status pmgp_train(const pmgp_field* data, const pmgp_spectrum* spectrum, const char* config_json,
                                pmgp_hyperparams* best, char** report_json);

/* ---- fitted models ---- */
/* Copies the training data and shares the spectrum; factors the covariance once. */
PMGP_API pmgp_status pmgp_model_create(const pmgp_hyperparams* theta, const pmgp_field* data,
                                       const pmgp_spectrum* spectrum, pmgp_model** out);
PMGP_API pmgp_status pmgp_model_nll(const pmgp_model* model, double* out);
/* Posterior mean (and optionally variance) on the vertex x time grid. */
PMGP_API pmgp_status pmgp_model_predict(const pmgp_model* model, const int* vertices, int64_t n_vertices,
                                        const double* times, int64_t n_times, pmgp_field** mean,
                                        pmgp_field** variance);
PMGP_API pmgp_status pmgp_model_loo(const pmgp_model* model, double* tau2_cv, pmgp_field** residuals);
/* Physics loss of the posterior mean at n_col seeded collocation points. */
PMGP_API pmgp_status pmgp_model_physics_loss(const pmgp_model* model, const char* fhn_json, int64_t n_col,
                                             uint64_t seed, double* out);
PMGP_API void pmgp_model_free(pmgp_model* model);

PMGP_API pmgp_status pmgp_hyperparams_from_json(const char* json, pmgp_hyperparams* out);
PMGP_API pmgp_status pmgp_hyperparams_to_json(const pmgp_hyperparams* theta, char** json_out);

#ifdef __cplusplus
}
#endif

#endif
