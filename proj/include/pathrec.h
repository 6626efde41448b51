#ifndef PATHREC_H
#define PATHREC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Error codes: every function returning int yields PRC_OK or one of these;
 * prc_last_error() describes the most recent failure on the calling thread. */
enum {
    PRC_OK = 0,
    PRC_ERR_CONFIG = 1,  /* bad option values, malformed scene */
    PRC_ERR_IO = 2,      /* missing or unreadable/unwritable files */
    PRC_ERR_NUMERIC = 3, /* non-finite results, aborted optimization */
    PRC_ERR_INVALID = 4  /* null handles, out-of-range indices */
};

typedef struct prc_scene prc_scene;
typedef struct prc_result prc_result;
typedef struct prc_grid prc_grid;

const char* prc_version(void);
const char* prc_last_error(void);

int prc_scene_load(const char* path, prc_scene** out);
void prc_scene_free(prc_scene* scene);
/* Writes one violation per line into buf (truncating); n_violations gets the
 * total count. A well-formed scene yields PRC_OK with count 0. */
int prc_scene_validate(const prc_scene* scene, char* buf, size_t buflen, int* n_violations);
int prc_scene_detector_count(const prc_scene* scene, int* out);

typedef struct {
    uint64_t n_paths;
    uint64_t seed;
    int workers;     /* <= 0: use hardware concurrency */
    int max_bounces; /* <= 0: default 500 */
    const char* store_dump_path; /* optional path-store dump, may be NULL */
} prc_render_opts;

int prc_render(const prc_scene* scene, const prc_render_opts* opts, prc_result** out);

typedef struct {
    uint64_t seed;
    uint64_t n_paths;   /* first-stage path count */
    int workers;
    int max_bounces;    /* <= 0: default 500 */
    int recycle_period; /* <= 0: default 30 */
    int max_iterations;
    int n_stages;       /* >= 1; later stages double the path count */
    double alpha;       /* optimizer step size */
    double carve_threshold; /* fraction of per-view max, tomography init */
    double carve_fill;      /* extinction for carved-in voxels */
    double init_kappa, init_gamma; /* reflectometry starting point */
    double gamma_step_scale;       /* extra step multiplier for gamma; <= 0: 1 */
    const char* gt_dir;     /* directory holding gt_<detector>.pfm images */
    const char* out_dir;    /* loss.csv + checkpoints; may be NULL */
    const char* truth_grid; /* optional truth for eps/delta logging */
    double truth_kappa, truth_gamma; /* reflectometry truth (used when > 0) */
} prc_reconstruct_opts;

/* Tomography when the scene declares an unknown species, reflectometry when
 * it declares a target surface. */
int prc_reconstruct(const prc_scene* scene, const prc_reconstruct_opts* opts, prc_result** out);

int prc_result_image(const prc_result* result, int detector, const double** data, int* rows,
                     int* cols);
int prc_result_save_pfm(const prc_result* result, int detector, const char* path);
int prc_result_save_pgm(const prc_result* result, int detector, const char* path);
/* Recovered surface parameters (reflectometry results only). */
int prc_result_params(const prc_result* result, double* kappa_s, double* gamma);
/* Recovered extinction grid (tomography results only). */
int prc_result_grid_save(const prc_result* result, const char* path);
int prc_result_final_loss(const prc_result* result, double* loss);
int prc_result_save_csv(const prc_result* result, const char* path);
void prc_result_free(prc_result* result);

int prc_grid_load(const char* path, prc_grid** out);
int prc_grid_save(const prc_grid* grid, const char* path);
/* L1 relative error and relative mass bias of estimate against truth. */
int prc_grid_metrics(const prc_grid* estimate, const prc_grid* truth, double* eps, double* delta);
void prc_grid_free(prc_grid* grid);

/* Fast internal consistency checks (phase normalization, transmittance,
 * sampling statistics); PRC_OK when everything passes. */
int prc_selftest(void);

#ifdef __cplusplus
}
#endif

#endif /* PATHREC_H */
