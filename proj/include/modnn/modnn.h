#ifndef MODNN_MODNN_H
#define MODNN_MODNN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MODNN_API __declspec(dllexport)
#else
#define MODNN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as process exit codes. */
typedef enum modnn_status {
  MODNN_OK = 0,
  MODNN_ERR_INTERNAL = 1,
  MODNN_ERR_CONFIG = 2,
  MODNN_ERR_TRAINING = 3,
  MODNN_ERR_INTEGRITY = 4,
  MODNN_ERR_NUMERICAL = 5,
  MODNN_ERR_INVALID_ARGUMENT = 6
} modnn_status;

typedef struct modnn_config modnn_config;
typedef struct modnn_model modnn_model;

MODNN_API const char* modnn_version(void);

/* Message of the last failed call on this thread; empty after a success. */
MODNN_API const char* modnn_last_error(void);

/* Experiment configuration. */
MODNN_API modnn_status modnn_config_load(const char* path, modnn_config** out);
MODNN_API modnn_status modnn_config_parse(const char* text, modnn_config** out);
MODNN_API modnn_status modnn_config_set(modnn_config* config, const char* key, const char* value);
/* Copies the value text into buf (NUL-terminated). *needed receives the full length
   including the terminator; MODNN_ERR_INVALID_ARGUMENT when cap is too small. */
MODNN_API modnn_status modnn_config_get(const modnn_config* config, const char* key, char* buf, size_t cap,
                                        size_t* needed);
/* 16 hex digits plus terminator. */
MODNN_API modnn_status modnn_config_hash(const modnn_config* config, char out[17]);
MODNN_API void modnn_config_free(modnn_config* config);

/* Pipeline commands. out_dir may be NULL to use the configured out_dir. */
MODNN_API modnn_status modnn_simulate(const modnn_config* config, const char* out_dir);
MODNN_API modnn_status modnn_train(const modnn_config* config, const char* out_dir);
MODNN_API modnn_status modnn_audit(const modnn_config* config, const char* out_dir);
MODNN_API modnn_status modnn_control(const modnn_config* config, const char* out_dir);
/* "simulate", "train", "audit" or "control". */
MODNN_API modnn_status modnn_run(const char* command, const modnn_config* config, const char* out_dir);

/* Trained model checkpoints. */
MODNN_API modnn_status modnn_model_load(const char* path, modnn_model** out);
MODNN_API const char* modnn_model_variant(const modnn_model* model);
MODNN_API size_t modnn_model_history(const modnn_model* model);
MODNN_API size_t modnn_model_horizon(const modnn_model* model);
/* Predicts zone temperatures (degC) for the window anchored at `anchor` of a frame
   CSV, using the logged HVAC power. out receives horizon values. */
MODNN_API modnn_status modnn_model_predict(const modnn_model* model, const char* frame_path, size_t anchor,
                                           double* out, size_t cap);
MODNN_API void modnn_model_free(modnn_model* model);

#ifdef __cplusplus
}
#endif

#endif
