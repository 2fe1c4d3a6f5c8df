#ifndef PDEFLOW_H
#define PDEFLOW_H

/* C interface to the pdeflow estimation core.
 *
 * All objects are opaque handles created and destroyed by this library.
 * Functions return pdeflow_status; on any failure the thread-local message
 * from pdeflow_last_error() describes the cause. Buffers are caller-owned
 * and sized from pdeflow_series_info / pdeflow_fit_info; strings returned
 * by the library are released with pdeflow_string_free.
 */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pdeflow_status {
    PDEFLOW_OK = 0,
    PDEFLOW_ERR_INVALID = 1,  /* bad arguments or config */
    PDEFLOW_ERR_NUMERIC = 2,  /* CFL violation or divergence */
    PDEFLOW_ERR_IO = 3,       /* file missing, malformed, or unwritable */
    PDEFLOW_ERR_INTERNAL = 4, /* unexpected failure */
} pdeflow_status;

typedef struct pdeflow_series pdeflow_series;
typedef struct pdeflow_mask pdeflow_mask;
typedef struct pdeflow_fit pdeflow_fit;

const char* pdeflow_version(void);

/* Message for the most recent failure on this thread; empty if none. */
const char* pdeflow_last_error(void);

/* ---- concentration series ---- */

/* data holds frames * nx*ny*nz floats, frame-major, x-fastest. */
pdeflow_status pdeflow_series_create(int nx, int ny, int nz, double dx, double dy,
                                     double dz, int frames, double dt_s,
                                     const float* data, pdeflow_series** out);
pdeflow_status pdeflow_series_read(const char* path, pdeflow_series** out);
pdeflow_status pdeflow_series_write(const pdeflow_series* s, const char* path);
pdeflow_status pdeflow_series_info(const pdeflow_series* s, int* nx, int* ny, int* nz,
                                   double* dx, double* dy, double* dz, int* frames,
                                   double* dt_s);
/* Copies frame i into out (nx*ny*nz floats). */
pdeflow_status pdeflow_series_frame(const pdeflow_series* s, int i, float* out);
void pdeflow_series_free(pdeflow_series* s);

/* Converts raw scanner signal to concentration using the first
 * baseline_frames frames as the pre-contrast reference. */
pdeflow_status pdeflow_signal_to_concentration(const pdeflow_series* s,
                                               int baseline_frames, double kappa,
                                               pdeflow_series** out);

/* Adds Rician noise at sigma = level * frame max, one substream per frame. */
pdeflow_status pdeflow_add_rician_noise(const pdeflow_series* s, double level,
                                        uint64_t seed, pdeflow_series** out);

/* ---- domain masks ---- */

/* Whole-grid mask; dirichlet_slabs != 0 marks the first and last axial
 * slices as Dirichlet boundary. */
pdeflow_status pdeflow_mask_full(int nx, int ny, int nz, double dx, double dy,
                                 double dz, int dirichlet_slabs, pdeflow_mask** out);
pdeflow_status pdeflow_mask_read(const char* path, pdeflow_mask** out);
void pdeflow_mask_free(pdeflow_mask* m);

/* ---- estimation ---- */

/* Fits velocity potentials and diffusivity to the series. config_json is a
 * JSON object overriding estimator defaults (unknown keys are rejected);
 * NULL or "" keeps every default. */
pdeflow_status pdeflow_fit_run(const pdeflow_series* s, const pdeflow_mask* m,
                               const char* config_json, pdeflow_fit** out);
pdeflow_status pdeflow_fit_info(const pdeflow_fit* f, int* nx, int* ny, int* nz,
                                int* iterations, int* converged);
/* Each output buffer holds nx*ny*nz doubles. axis is 0, 1, or 2. */
pdeflow_status pdeflow_fit_velocity(const pdeflow_fit* f, int axis, double* out);
pdeflow_status pdeflow_fit_speed(const pdeflow_fit* f, double* out);
pdeflow_status pdeflow_fit_diffusivity(const pdeflow_fit* f, double* out);
/* JSON manifest of the fit (config, loss history, convergence); caller
 * frees with pdeflow_string_free. */
pdeflow_status pdeflow_fit_manifest(const pdeflow_fit* f, char** out);
void pdeflow_fit_free(pdeflow_fit* f);

/* ---- composite commands ---- */

/* Generates a synthetic series with band-limited ground truth and writes
 * it with the truth maps under out_dir. mode is "advection", "diffusion",
 * or "advdiff"; config_json overrides the protocol defaults. */
pdeflow_status pdeflow_simulate(const char* mode, const char* config_json,
                                const char* out_dir);

/* Constant-field slab demo: simulate, refit, resimulate; writes PGM strips
 * of measured vs predicted frames plus maps and a manifest. */
pdeflow_status pdeflow_demo2d(const char* config_json, const char* out_dir);

/* Lesion-vs-mirror statistics for each map (single-frame series), one CSV
 * row per map, written to csv_path. midline_axis is 0 (X) or 1 (Y). */
pdeflow_status pdeflow_region_metrics_csv(const pdeflow_series* const* maps,
                                          const char* const* names, int n_maps,
                                          const pdeflow_mask* lesion,
                                          const pdeflow_mask* domain, int midline_axis,
                                          int midline_index, int welch,
                                          const char* csv_path);

/* Speed, orientation, diffusivity, and Peclet maps with mid-slice PGM
 * renders and a Peclet histogram, written under out_dir. vx/vy/vz/d are
 * single-frame series on one grid. */
pdeflow_status pdeflow_feature_maps(const pdeflow_series* vx, const pdeflow_series* vy,
                                    const pdeflow_series* vz, const pdeflow_series* d,
                                    double char_len, const char* out_dir);

/* ---- experiments ---- */

/* Runs a named synthetic protocol end to end and writes its artifacts
 * under out_dir. config_json overrides recipe defaults; it must name the
 * recipe unless recipe_name is non-NULL. */
pdeflow_status pdeflow_experiment_run(const char* recipe_name, const char* config_json,
                                      const char* out_dir);
/* Re-executes a written manifest; artifacts are reproduced bit-for-bit. */
pdeflow_status pdeflow_experiment_rerun(const char* manifest_path, const char* out_dir);

void pdeflow_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PDEFLOW_H */
