/*
 * faramtn — multi-task attribute network with group-specific attention,
 * cross-group feature fusion, and dynamic task weighting.
 *
 * C interface to the shared library. All functions return far_status; on
 * failure far_last_error() holds a thread-local description. Objects returned
 * through out-parameters are owned by the caller and released with the
 * matching *_close / *_free function.
 */
#ifndef FARAMTN_H
#define FARAMTN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum far_status {
    FAR_OK = 0,
    FAR_EINVAL = 1,      /* bad argument (null pointer, bad enum string) */
    FAR_ESHAPE = 2,      /* tensor/parameter shape mismatch */
    FAR_ECONFIG = 3,     /* invalid configuration value */
    FAR_EPARSE = 4,      /* malformed file or config text */
    FAR_EIO = 5,         /* filesystem failure */
    FAR_ELOOKUP = 6,     /* unknown name or out-of-range index */
    FAR_EVALIDATION = 7, /* domain invariant violated */
    FAR_ENUMERIC = 8,    /* non-finite value where a finite one is required */
    FAR_EINTERNAL = 9
} far_status;

const char* far_status_name(far_status status);

/* Message for the most recent failure on this thread; empty string if none. */
const char* far_last_error(void);

const char* far_version(void);

/* ---- datasets ----------------------------------------------------------- */

typedef struct far_dataset far_dataset;

/* Generate n synthetic samples from a spec file and persist them to out_dir
 * (data.bin + spec.json). */
far_status far_generate_dataset(const char* spec_path, int32_t n, uint64_t seed,
                                const char* out_dir);

far_status far_dataset_open(const char* dir, far_dataset** out);
void far_dataset_close(far_dataset* dataset);
far_status far_dataset_size(const far_dataset* dataset, int32_t* out_samples);
far_status far_dataset_attribute_count(const far_dataset* dataset, int32_t* out_count);
/* Pointer stays valid while the dataset handle is open. */
far_status far_dataset_attribute_name(const far_dataset* dataset, int32_t index,
                                      const char** out_name);

/* ---- training ------------------------------------------------------------ */

/* Run the training loop described by a JSON config file. seed_override < 0
 * keeps the config's seed. Writes metrics.jsonl and model.bin into out_dir. */
far_status far_train(const char* config_path, int64_t seed_override, const char* out_dir);

/* ---- models ---------------------------------------------------------------- */

typedef struct far_model far_model;

far_status far_model_open(const char* path, far_model** out);
void far_model_close(far_model* model);
far_status far_model_attribute_count(const far_model* model, int32_t* out_count);
far_status far_model_attribute_name(const far_model* model, int32_t index, const char** out_name);

/* per_attribute must hold far_model_attribute_count doubles (may be NULL). */
far_status far_evaluate(const far_model* model, const far_dataset* dataset, double* per_attribute,
                        double* out_mean_accuracy);

/* ---- verification ---------------------------------------------------------- */

/* Certify analytic gradients of the configured objective against central
 * finite differences; out_max_rel_error receives the worst relative error
 * over at least min_coords sampled coordinates (0 picks the default 200). */
far_status far_gradcheck(const char* config_path, uint64_t seed, double step, int32_t min_coords,
                         double* out_max_rel_error);

/* ---- dynamic weighting ------------------------------------------------------ */

/* Replay per-task loss rows through a weighting strategy ("dws", "dwa",
 * "uniform") and write the CSV table to out_path. */
far_status far_dws_simulate(const char* replay_path, const char* strategy, double beta,
                            double temperature, const char* out_path);

/* ---- parameter audit --------------------------------------------------------- */

/* Human-readable parameter-count breakdown. config_path may be NULL when only
 * the fixed large-scale reference block is wanted. Free with far_string_free. */
far_status far_params_report(const char* config_path, int include_reference, char** out_text);

void far_string_free(char* text);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* FARAMTN_H */
