#ifndef CANTOR_COARSE_H
#define CANTOR_COARSE_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CcStatus {
  CC_STATUS_OK = 0,
  CC_STATUS_NULL_ARGUMENT = 1,
  CC_STATUS_UTF8 = 2,
  CC_STATUS_PARSE = 3,
  CC_STATUS_INVALID = 4,
  CC_STATUS_PRECONDITION = 5,
  CC_STATUS_CONSTRUCTION = 6,
  CC_STATUS_IO = 7,
  CC_STATUS_PANIC = 8,
} CcStatus;

/**
 * Finite metric space handle.
 */
typedef struct CcSpace CcSpace;

/**
 * Tower handle.
 */
typedef struct CcTower CcTower;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the next failing call.
 */
const char *cc_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void cc_string_free(char *s);

/**
 * # Safety
 * `json` must be a valid C string; `out` must be writable.
 */
enum CcStatus cc_space_from_json(const char *json, struct CcSpace **out);

/**
 * Truncated Cantor bi-cube over coordinates low..=high.
 *
 * # Safety
 * `out` must be writable.
 */
enum CcStatus cc_space_bicube(int64_t low, int64_t high, struct CcSpace **out);

/**
 * # Safety
 * `space` must be NULL or a live handle from this library.
 */
void cc_space_free(struct CcSpace *space);

/**
 * # Safety
 * `space` must be a live handle.
 */
size_t cc_space_len(const struct CcSpace *space);

/**
 * # Safety
 * `space` must be a live handle; `scale` a valid C string; `count` writable.
 */
enum CcStatus cc_space_components(const struct CcSpace *space, const char *scale, size_t *count);

/**
 * θ and Θ as newly allocated decimal strings (free with `cc_string_free`).
 *
 * # Safety
 * `space` must be a live handle; `delta`, `eps` valid C strings; outputs writable.
 */
enum CcStatus cc_space_capacity(const struct CcSpace *space,
                                const char *delta,
                                const char *eps,
                                char **theta,
                                char **big_theta);

/**
 * Window-relative characterization in mode "universal", "micro", "macro" or "bi".
 *
 * # Safety
 * `space` must be a live handle; `grid`, `mode` valid C strings; `pass` writable.
 */
enum CcStatus cc_characterization_check(const struct CcSpace *space,
                                        const char *grid,
                                        const char *mode,
                                        bool *pass);

/**
 * Bi-mode synthesis onto the binary boundary; writes the relation file and whether the
 * certificate passes both grid ends.
 *
 * # Safety
 * `space` must be a live handle; `grid` a valid C string; outputs writable.
 */
enum CcStatus cc_synthesize_bi(const struct CcSpace *space,
                               const char *grid,
                               char **relation_json,
                               bool *certified);

/**
 * # Safety
 * `json` must be a valid C string; `out` writable.
 */
enum CcStatus cc_tower_from_json(const char *json, struct CcTower **out);

/**
 * # Safety
 * `tower` must be NULL or a live handle from this library.
 */
void cc_tower_free(struct CcTower *tower);

/**
 * # Safety
 * `tower` must be a live handle.
 */
size_t cc_tower_level_count(const struct CcTower *tower);

/**
 * Boundary with f(l) = 2^l as a new space handle.
 *
 * # Safety
 * `tower` must be a live handle; `out` writable.
 */
enum CcStatus cc_tower_boundary(const struct CcTower *tower, struct CcSpace **out);

/**
 * Classifies two group chains given as chain files. `equivalent` is set to 1 or 0; for distinct
 * chains `witness_prime` receives the separating prime, otherwise 0.
 *
 * # Safety
 * Both strings must be valid C strings; outputs writable.
 */
enum CcStatus cc_classify_chains(const char *first,
                                 const char *second,
                                 bool *equivalent,
                                 uint64_t *witness_prime);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CANTOR_COARSE_H */
