#ifndef PACT_H
#define PACT_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

#define PACT_OK 0

#define PACT_ERR_NULL 1

#define PACT_ERR_INVALID_CONFIG 2

#define PACT_ERR_INVALID_ARGUMENT 3

#define PACT_ERR_SHAPE_MISMATCH 4

#define PACT_ERR_IO 5

#define PACT_ERR_PARSE 6

#define PACT_ERR_MISSING_SCHEDULE 7

#define PACT_ERR_BAD_MAGIC 10

#define PACT_ERR_UNSUPPORTED_VERSION 11

#define PACT_ERR_TRUNCATED 12

#define PACT_ERR_DUPLICATE_NAME 13

#define PACT_ERR_OVERSIZED_DIMS 14

#define PACT_ERR_INVALID_NAME 15

#define PACT_ERR_TRAILING_BYTES 16

#define PACT_ERR_UTF8 20

#define PACT_ERR_PANIC 99

typedef struct PactComposites PactComposites;

typedef struct PactConfig PactConfig;

typedef struct PactImage PactImage;

typedef struct PactModel PactModel;

typedef struct PactPhantom PactPhantom;

typedef struct PactRecord PactRecord;

typedef struct PactSchedule PactSchedule;

typedef struct PactSignals PactSignals;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until the next call.
 */
const char *pact_last_error(void);

int32_t pact_config_default(PactConfig **out);

/**
 * 64x64 grid, one disc per random phantom.
 */
int32_t pact_config_desk(PactConfig **out);

int32_t pact_config_load(const char *path, PactConfig **out);

int32_t pact_config_grid_size(const PactConfig *config, uintptr_t *out);

void pact_config_free(PactConfig *config);

int32_t pact_phantom_random(uint64_t seed, const PactConfig *config, PactPhantom **out);

int32_t pact_phantom_load(const char *path, PactPhantom **out);

int32_t pact_phantom_n_discs(const PactPhantom *phantom, uintptr_t *out);

void pact_phantom_free(PactPhantom *phantom);

/**
 * Delays 0, 50, 100 and 150 us, unit gains, no echoes.
 */
int32_t pact_schedule_standard(PactSchedule **out);

/**
 * Delays `[0, 1.5T + b, 2.5T + b, 3.5T + b]` in seconds, with `n_echoes` echoes of
 * amplitude ratio `echo_coeff` (0 disables echoes).
 */
int32_t pact_schedule_periodic(double period,
                               double bias,
                               double echo_coeff,
                               uintptr_t n_echoes,
                               PactSchedule **out);

int32_t pact_schedule_delays(const PactSchedule *schedule, double *out, uintptr_t len);

/**
 * Writes whether signals of `duration` seconds and their echoes never overlap.
 */
int32_t pact_schedule_alias_free(const PactSchedule *schedule, double duration, bool *out);

void pact_schedule_free(PactSchedule *schedule);

int32_t pact_simulate(const PactPhantom *phantom, const PactConfig *config, PactSignals **out);

/**
 * Wraps `rows * cols` row-major samples, one row per sensor, starting at t = 0.
 */
int32_t pact_signals_from_data(const double *data,
                               uintptr_t rows,
                               uintptr_t cols,
                               double sample_rate,
                               PactSignals **out);

int32_t pact_signals_shape(const PactSignals *signals, uintptr_t *rows, uintptr_t *cols);

int32_t pact_signals_copy(const PactSignals *signals, double *out, uintptr_t len);

void pact_signals_free(PactSignals *signals);

int32_t pact_superimpose(const PactSignals *signals, uintptr_t group_size, PactComposites **out);

/**
 * Simulates, superimposes and passes the composites through `schedule`'s delay line and
 * back. A NULL schedule skips the delay line.
 */
int32_t pact_acquire(const PactPhantom *phantom,
                     const PactConfig *config,
                     const PactSchedule *schedule,
                     PactComposites **out);

int32_t pact_composites_shape(const PactComposites *composites,
                              uintptr_t *groups,
                              uintptr_t *samples);

int32_t pact_composites_copy(const PactComposites *composites, double *out, uintptr_t len);

void pact_composites_free(PactComposites *composites);

int32_t pact_mux(const PactComposites *composites, const PactSchedule *schedule, PactRecord **out);

int32_t pact_record_len(const PactRecord *record, uintptr_t *out);

int32_t pact_record_copy(const PactRecord *record, double *out, uintptr_t len);

/**
 * Cuts each input's `window` samples back out of the record. `group_size` is the number
 * of sensors behind each composite, needed by `pact_das_composites`.
 */
int32_t pact_demux(const PactRecord *record,
                   uintptr_t window,
                   uintptr_t group_size,
                   PactComposites **out);

void pact_record_free(PactRecord *record);

/**
 * Delay-and-sum over every sensor channel.
 */
int32_t pact_das(const PactSignals *signals, const PactConfig *config, PactImage **out);

/**
 * Delay-and-sum treating each composite as one sensor at its group centre.
 */
int32_t pact_das_composites(const PactComposites *composites,
                            const PactConfig *config,
                            PactImage **out);

int32_t pact_image_side(const PactImage *image, uintptr_t *out);

/**
 * Row-major pixels, row 0 at the most negative y.
 */
int32_t pact_image_copy(const PactImage *image, double *out, uintptr_t len);

int32_t pact_image_write_pgm(const PactImage *image, const char *path);

void pact_image_free(PactImage *image);

/**
 * Loads weights saved by `pact train` (the `.patd` file; its `.toml` manifest must sit
 * next to it).
 */
int32_t pact_model_load(const char *path, PactModel **out);

int32_t pact_model_infer(const PactModel *model, const PactComposites *composites, PactImage **out);

void pact_model_free(PactModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PACT_H */
