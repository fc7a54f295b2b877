/* C API for the kdpose pose-estimation and distillation pipeline.
 *
 * All entry points return a kdp_status; on failure kdp_last_error() holds a
 * thread-local description. Handles are opaque and freed with their matching
 * *_free function.
 */

#ifndef KDPOSE_H
#define KDPOSE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kdp_status {
    KDP_OK = 0,
    KDP_ERR_INVALID_ARGUMENT = 1,
    KDP_ERR_DIMENSION = 2,
    KDP_ERR_INSUFFICIENT_DATA = 3,
    KDP_ERR_NO_CONVERGENCE = 4,
    KDP_ERR_BEHIND_CAMERA = 5,
    KDP_ERR_DEGENERATE = 6,
    KDP_ERR_NUMERIC = 7,
    KDP_ERR_IO = 8,
    KDP_ERR_PARSE = 9,
    KDP_ERR_INCOMPATIBLE = 10,
    KDP_ERR_INTERNAL = 11
} kdp_status;

const char* kdp_status_name(kdp_status status);

/* Message describing the most recent failure on this thread. */
const char* kdp_last_error(void);

const char* kdp_version(void);

/* ---- configuration ---------------------------------------------------- */

typedef struct kdp_config kdp_config;

kdp_status kdp_config_create(kdp_config** out);
kdp_status kdp_config_load(const char* path, kdp_config** out);
kdp_status kdp_config_save(const kdp_config* config, const char* path);

/* Sets one field by name; the value is parsed as a JSON literal
 * (e.g. "0.001", "true") or taken as a plain string. */
kdp_status kdp_config_set(kdp_config* config, const char* key, const char* value);

/* Writes the field's JSON representation into buffer. */
kdp_status kdp_config_get(const kdp_config* config, const char* key, char* buffer,
                          size_t capacity);

void kdp_config_free(kdp_config* config);

/* ---- pipeline operations ---------------------------------------------- */

/* Generates the synthetic dataset described by the config into out_dir. */
kdp_status kdp_generate_dataset(const kdp_config* config, const char* out_dir);

kdp_status kdp_train_teacher(const kdp_config* config, const char* dataset_dir,
                             const char* out_dir);

/* teacher_checkpoint may be NULL for the undistilled baseline. */
kdp_status kdp_train_student(const kdp_config* config, const char* dataset_dir,
                             const char* teacher_checkpoint, const char* out_dir);

/* With oracle_mode nonzero the network is bypassed (checkpoint_dir may be
 * NULL) and ground-truth encodings drive decode + PnP + metrics. */
kdp_status kdp_evaluate(const kdp_config* config, const char* checkpoint_dir,
                        const char* dataset_dir, int oracle_mode, const char* out_dir);

kdp_status kdp_ablate(const kdp_config* config, const char* dataset_dir,
                      const char* teacher_checkpoint, int seeds, int threads,
                      const char* out_dir);

/* Runs the finite-difference gradient suite. Returns KDP_OK when every check
 * passes, KDP_ERR_NUMERIC otherwise; the summary line lands in `summary`. */
kdp_status kdp_gradcheck(uint64_t seed, int verbose, char* summary, size_t capacity);

/* ---- models ------------------------------------------------------------ */

typedef struct kdp_model kdp_model;

/* student nonzero builds the config's student spec, else the teacher spec. */
kdp_status kdp_model_build(const kdp_config* config, int student, uint64_t seed,
                           kdp_model** out);
kdp_status kdp_model_load(const char* checkpoint_dir, kdp_model** out);

/* Parameter count and FLOPs (2 per multiply-accumulate, bias adds included)
 * at the given input resolution. */
kdp_status kdp_model_stats(const kdp_model* model, int height, int width,
                           uint64_t* param_count, uint64_t* flops);

void kdp_model_free(kdp_model* model);

#ifdef __cplusplus
}
#endif

#endif /* KDPOSE_H */
