#ifndef SHOTVALUE_H
#define SHOTVALUE_H

#include <stddef.h>
#include <stdint.h>

#if defined(SV_BUILDING_LIBRARY)
#define SV_API __attribute__((visibility("default")))
#else
#define SV_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sv_status {
  SV_OK = 0,
  SV_INVALID_ARGUMENT = 1,
  SV_PARSE_ERROR = 2,
  SV_CONFIG_ERROR = 3,
  SV_IO_ERROR = 4,
  SV_NUMERIC_ERROR = 5,
  SV_GEOMETRY_ERROR = 6,
  SV_NOT_FOUND = 7,
  SV_INTERNAL_ERROR = 8
} sv_status;

/* Message for the last failing call on this thread; "" after a success. */
SV_API const char* sv_last_error(void);
SV_API const char* sv_status_name(sv_status status);
SV_API const char* sv_version(void);

/* ---- pipeline ---- */

typedef struct sv_config sv_config;

SV_API sv_status sv_config_new(sv_config** out);
SV_API sv_status sv_config_load(const char* path, sv_config** out);
/* Unknown keys and bad values give SV_CONFIG_ERROR. */
SV_API sv_status sv_config_set(sv_config* config, const char* key, const char* value);
/* Copies the resolved value of a path key (out_dir, tracking, metadata,
   model_dir) into buf, truncating to capacity. */
SV_API sv_status sv_config_path(const sv_config* config, const char* key, char* buf, size_t capacity);
SV_API void sv_config_free(sv_config* config);

typedef void (*sv_log_fn)(const char* line, void* user);

/* simulate, encode, fit-gmm, fit-outcome, metrics or heatmap. log may be
   NULL. */
SV_API sv_status sv_run(const sv_config* config, const char* command, sv_log_fn log, void* user);

typedef struct sv_estimate {
  double mean;
  double se;
  size_t n;
  double error_fraction;
} sv_estimate;

/* ESV of one recorded shot from the samples up to t seconds after impact. */
SV_API sv_status sv_esv(const sv_config* config, const char* shot_id, double t, sv_estimate* out);

/* ---- models ---- */

typedef struct sv_mixture sv_mixture;

SV_API sv_status sv_mixture_load(const char* path, sv_mixture** out);
SV_API int sv_mixture_dim(const sv_mixture* mixture);
SV_API int sv_mixture_components(const sv_mixture* mixture);
SV_API sv_status sv_mixture_log_density(const sv_mixture* mixture, const double* x, size_t dim, double* out);
/* Draws n rows of dim values into out (row-major, n * dim doubles). */
SV_API sv_status sv_mixture_sample(const sv_mixture* mixture, size_t n, uint64_t seed, double* out);
SV_API void sv_mixture_free(sv_mixture* mixture);

typedef struct sv_outcome sv_outcome;

SV_API sv_status sv_outcome_load(const char* path, sv_outcome** out);
/* Number of classifier inputs and the name of input i. */
SV_API size_t sv_outcome_features(const sv_outcome* model);
SV_API const char* sv_outcome_feature_name(const sv_outcome* model, size_t i);
SV_API sv_status sv_outcome_predict(const sv_outcome* model, const double* features, size_t count, double* out);
SV_API void sv_outcome_free(sv_outcome* model);

/* ---- conditioning and estimation ---- */

typedef struct sv_observations sv_observations;

/* Linear constraints on an encoding of the given dimension. */
SV_API sv_status sv_observations_new(int dim, sv_observations** out);
/* row . encoding = value + noise with the given variance. */
SV_API sv_status sv_observations_add(sv_observations* obs, const double* row, double value, double noise_var);
SV_API sv_status sv_observations_add_unit(sv_observations* obs, int index, double value, double noise_var);
SV_API size_t sv_observations_size(const sv_observations* obs);
SV_API void sv_observations_free(sv_observations* obs);

typedef struct sv_shot_context {
  int shot_type;      /* 0 serve, 1 serve_return, 2 rally */
  int one_bounce;     /* 1 one-bounce layout, 0 no-bounce */
  int receiver_left;  /* 1 left-handed receiver */
  double horizon;     /* root search window in seconds; 0 means 5 */
} sv_shot_context;

/* Monte Carlo ESV under the conditioned mixture with regulation court
   geometry. */
SV_API sv_status sv_esv_at(const sv_observations* obs, const sv_mixture* mixture, const sv_outcome* model,
                           const sv_shot_context* context, size_t n_samples, uint64_t seed, sv_estimate* out);

/* Win probability of a complete encoding; error-class shots give 0. */
SV_API sv_status sv_value_encoding(const double* encoding, size_t dim, const sv_shot_context* context,
                                   const sv_outcome* model, double* out);

#ifdef __cplusplus
}
#endif

#endif
