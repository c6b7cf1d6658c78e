/* C ABI for the ghdinc decomposition library. */

/* Generated with cbindgen; edit the Rust sources instead. */

#ifndef GHDINC_H
#define GHDINC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum GhdincStatus {
  /**
   * Success.
   */
  GHDINC_OK = 0,
  /**
   * No decomposition within the width bound exists.
   */
  GHDINC_REJECT = 1,
  /**
   * Malformed input (text, JSON, or precondition violation).
   */
  GHDINC_ERR_PARSE = 2,
  /**
   * The cooperative deadline expired.
   */
  GHDINC_TIMEOUT = 3,
  /**
   * A decomposition failed validation.
   */
  GHDINC_ERR_INVALID = 4,
  /**
   * A required pointer argument was null.
   */
  GHDINC_ERR_NULL = 5,
  /**
   * A string argument was not valid UTF-8.
   */
  GHDINC_ERR_UTF8 = 6,
  /**
   * The library panicked; state may be inconsistent.
   */
  GHDINC_ERR_PANIC = 7,
} GhdincStatus;

/**
 * Opaque decomposition handle.
 */
typedef struct GhdincGhd GhdincGhd;

/**
 * Opaque hypergraph handle.
 */
typedef struct GhdincHypergraph GhdincHypergraph;

#ifdef __cplusplus
extern "C" {
#endif  // __cplusplus

/**
 * Message for the most recent error on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ghdinc_last_error(void);

/**
 * Parses hypergraph text into a new handle; free with
 * `ghdinc_hypergraph_free`.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
GhdincStatus ghdinc_hypergraph_parse(const char *text, GhdincHypergraph **out);

/**
 * Serializes a hypergraph to its canonical text; free the result with
 * `ghdinc_string_free`.
 *
 * # Safety
 * `h` must be a live handle from this library and `out` a valid pointer.
 */
GhdincStatus ghdinc_hypergraph_to_text(const GhdincHypergraph *h, char **out);

/**
 * # Safety
 * `h` must be null or a handle returned by this library, not yet freed.
 */
void ghdinc_hypergraph_free(GhdincHypergraph *h);

/**
 * Computes a decomposition of width at most `width`. `timeout_ms` of 0
 * means no deadline.
 *
 * # Safety
 * `h` must be a live hypergraph handle and `out` a valid pointer.
 */
GhdincStatus ghdinc_decompose(const GhdincHypergraph *h,
                              uint32_t width,
                              uint64_t timeout_ms,
                              GhdincGhd **out);

/**
 * Updates a decomposition after a modification, given as modification
 * JSON. On success `out` holds a decomposition of the modified
 * hypergraph with width at most `width`.
 *
 * # Safety
 * `h` and `ghd` must be live handles, `modification_json` a
 * NUL-terminated string, and `out` a valid pointer.
 */
GhdincStatus ghdinc_update(const GhdincHypergraph *h,
                           const char *modification_json,
                           const GhdincGhd *ghd,
                           uint32_t width,
                           uint64_t timeout_ms,
                           GhdincGhd **out);

/**
 * Checks a decomposition against a hypergraph at the given width bound.
 * Returns `GHDINC_OK` when valid, `GHDINC_ERR_INVALID` otherwise (the
 * first violation is reported through `ghdinc_last_error`).
 *
 * # Safety
 * `h` and `ghd` must be live handles from this library.
 */
GhdincStatus ghdinc_validate(const GhdincHypergraph *h,
                             const GhdincGhd *ghd,
                             uint32_t width);

/**
 * Decomposition width.
 *
 * # Safety
 * `ghd` must be a live handle from this library.
 */
uint32_t ghdinc_ghd_width(const GhdincGhd *ghd);

/**
 * Serializes a decomposition to JSON; free the result with
 * `ghdinc_string_free`.
 *
 * # Safety
 * `ghd` must be a live handle and `out` a valid pointer.
 */
GhdincStatus ghdinc_ghd_to_json(const GhdincGhd *ghd, char **out);

/**
 * Parses decomposition JSON into a new handle; free with
 * `ghdinc_ghd_free`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
GhdincStatus ghdinc_ghd_from_json(const char *json, GhdincGhd **out);

/**
 * # Safety
 * `ghd` must be null or a handle returned by this library, not yet freed.
 */
void ghdinc_ghd_free(GhdincGhd *ghd);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void ghdinc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  // GHDINC_H
