#ifndef FRONTRUN_H
#define FRONTRUN_H

/* Generated from the frontrun-ffi crate by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of an FFI call; mirrors the CLI's exit codes.
typedef enum FrontrunStatus {
  // The call succeeded.
  FRONTRUN_STATUS_OK = 0,
  // A caller-supplied argument was null, malformed, or out of range.
  FRONTRUN_STATUS_USAGE = 1,
  // The chain fixture, price table, or their contents are broken.
  FRONTRUN_STATUS_DATA = 2,
  // A bug inside the engine; the message names the violated invariant.
  FRONTRUN_STATUS_INTERNAL = 3,
} FrontrunStatus;

// A loaded chain snapshot plus detector configuration.
//
// Created by `frontrun_engine_open`; the layout is private to the engine.
typedef struct FrontrunEngine FrontrunEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version of the engine as a static NUL-terminated string.
const char *frontrun_version(void);

// Message of the calling thread's most recent failure, or null if the last
// call succeeded. The pointer stays valid until the next engine call on the
// same thread; do not free it.
const char *frontrun_last_error(void);

// Opens an engine over a chain fixture (NDJSON) and a daily price table
// (CSV), loading the fixture's full block range. On success writes the new
// handle to `out_engine`.
//
// # Safety
// `chain_path` and `prices_path` must be NUL-terminated strings;
// `out_engine` must point to writable memory for one pointer.
enum FrontrunStatus frontrun_engine_open(const char *chain_path,
                                         const char *prices_path,
                                         struct FrontrunEngine **out_engine);

// Releases an engine handle. Passing null is a no-op.
//
// # Safety
// `engine` must be null or a handle produced by `frontrun_engine_open`
// that has not been closed already.
void frontrun_engine_close(struct FrontrunEngine *engine);

// Writes the engine's loaded block range to `out_first` and `out_last`
// (inclusive bounds).
//
// # Safety
// `engine` must be a live handle; the out-pointers must be writable.
enum FrontrunStatus frontrun_engine_block_range(const struct FrontrunEngine *engine,
                                                uint64_t *out_first,
                                                uint64_t *out_last);

// Scans for displacement attacks (copied payload mined first at a higher gas
// price) and returns them as NDJSON, one attack object per line. Re-execution
// uses the traces recorded in the fixture.
//
// # Safety
// `engine` must be a live handle; `out_ndjson` must be writable.
enum FrontrunStatus frontrun_scan_displacement(const struct FrontrunEngine *engine,
                                               char **out_ndjson);

// Scans for sandwich insertion attacks and returns them as NDJSON, one
// attack object per line.
//
// # Safety
// `engine` must be a live handle; `out_ndjson` must be writable.
enum FrontrunStatus frontrun_scan_insertion(const struct FrontrunEngine *engine, char **out_ndjson);

// Scans for block-stuffing suppression campaigns and returns them as NDJSON,
// one attack object per line including the per-round breakdown.
//
// # Safety
// `engine` must be a live handle; `out_ndjson` must be writable.
enum FrontrunStatus frontrun_scan_suppression(const struct FrontrunEngine *engine,
                                              char **out_ndjson);

// Releases a string returned by a scan. Passing null is a no-op.
//
// # Safety
// `text` must be null or a pointer produced by this library that has not
// been freed already.
void frontrun_string_free(char *text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRONTRUN_H */
