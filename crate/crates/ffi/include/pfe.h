#ifndef PFE_H
#define PFE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Initialization codes for [`PfeParams::init`].
 */
#define PFE_INIT_RANDOM 0

#define PFE_INIT_COLOR_COMBO 1

#define PFE_INIT_GMM_DENSITY 2

#define PFE_INIT_WSC_DENSITY 3

typedef enum PfeStatus {
  PFE_STATUS_OK = 0,
  PFE_STATUS_NULL_POINTER = 1,
  PFE_STATUS_INVALID_ARGUMENT = 2,
  PFE_STATUS_SHAPE = 3,
  PFE_STATUS_NUMERICAL = 4,
  PFE_STATUS_IO = 5,
  PFE_STATUS_FORMAT = 6,
  PFE_STATUS_PANIC = 7,
} PfeStatus;

/**
 * Opaque embedding result.
 */
typedef struct PfeEmbedding PfeEmbedding;

/**
 * Opaque image.
 */
typedef struct PfeImage PfeImage;

/**
 * Solver and graph parameters. Fill with [`pfe_params_default`] or
 * [`pfe_params_boundary`] and adjust.
 */
typedef struct PfeParams {
  uint32_t d;
  double p;
  double lambda;
  double r1;
  double r2;
  double alpha;
  double eps;
  uint32_t radius;
  double sigma_c;
  double sigma_x;
  /**
   * One of the `PFE_INIT_*` codes.
   */
  uint32_t init;
  uint64_t seed;
} PfeParams;

typedef struct PfeMetrics {
  double pri;
  double vi;
  double covering;
} PfeMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *pfe_last_error_message(void);

/**
 * # Safety
 * `out` must be null or point to writable memory for one `PfeParams`.
 */
enum PfeStatus pfe_params_default(struct PfeParams *out);

/**
 * Parameters tuned for boundary detection.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `PfeParams`.
 */
enum PfeStatus pfe_params_boundary(struct PfeParams *out);

/**
 * Creates an image from interleaved samples in `[0, 1]`, row-major,
 * `width * height * channels` values.
 *
 * # Safety
 * `data` must point to that many readable doubles; `out` must be writable.
 */
enum PfeStatus pfe_image_new(size_t width,
                             size_t height,
                             size_t channels,
                             const double *data,
                             struct PfeImage **out);

/**
 * Reads a binary PGM or PPM file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PfeStatus pfe_image_read(const char *path, struct PfeImage **out);

/**
 * # Safety
 * `img` must be null or a handle from `pfe_image_new`/`pfe_image_read` not
 * yet freed.
 */
void pfe_image_free(struct PfeImage *img);

/**
 * Computes the embedding of `img`.
 *
 * # Safety
 * `img` must be a live image handle, `params` readable, `out` writable.
 */
enum PfeStatus pfe_embed(const struct PfeImage *img,
                         const struct PfeParams *params,
                         struct PfeEmbedding **out);

/**
 * # Safety
 * `emb` must be null or a live embedding handle.
 */
void pfe_embedding_free(struct PfeEmbedding *emb);

/**
 * Number of pixels, or 0 for a null handle.
 *
 * # Safety
 * `emb` must be null or a live embedding handle.
 */
size_t pfe_embedding_n_pixels(const struct PfeEmbedding *emb);

/**
 * Number of channels, or 0 for a null handle.
 *
 * # Safety
 * `emb` must be null or a live embedding handle.
 */
size_t pfe_embedding_dim(const struct PfeEmbedding *emb);

/**
 * Length of the energy trace, or 0 for a null handle.
 *
 * # Safety
 * `emb` must be null or a live embedding handle.
 */
size_t pfe_embedding_trace_len(const struct PfeEmbedding *emb);

/**
 * Copies the channels column-major (`n_pixels * dim` values). With
 * `weighted`, the residual-weighted channels are copied instead.
 *
 * # Safety
 * `emb` must be a live embedding handle and `out` must hold `len` doubles.
 */
enum PfeStatus pfe_embedding_channels(const struct PfeEmbedding *emb,
                                      bool weighted,
                                      double *out,
                                      size_t len);

/**
 * Copies the per-channel weights `eta` (`dim` values).
 *
 * # Safety
 * `emb` must be a live embedding handle and `out` must hold `len` doubles.
 */
enum PfeStatus pfe_embedding_eta(const struct PfeEmbedding *emb, double *out, size_t len);

/**
 * Copies the total energy after every inner iteration.
 *
 * # Safety
 * `emb` must be a live embedding handle and `out` must hold `len` doubles.
 */
enum PfeStatus pfe_embedding_energy_trace(const struct PfeEmbedding *emb, double *out, size_t len);

/**
 * k-means on the embedding channels; writes one label per pixel.
 *
 * # Safety
 * `emb` must be a live embedding handle and `labels` must hold `len` values.
 */
enum PfeStatus pfe_segment(const struct PfeEmbedding *emb,
                           bool weighted,
                           size_t k,
                           uint64_t seed,
                           uint32_t *labels,
                           size_t len);

/**
 * Mean PRI, VI and covering of a segmentation against `n_gt` ground truths,
 * each `width * height` labels.
 *
 * # Safety
 * `seg` and every `gts[i]` must hold `width * height` labels; `gts` must hold
 * `n_gt` pointers; `out` must be writable.
 */
enum PfeStatus pfe_evaluate(size_t width,
                            size_t height,
                            const uint32_t *seg,
                            const uint32_t *const *gts,
                            size_t n_gt,
                            struct PfeMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PFE_H */
