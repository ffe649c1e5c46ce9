#ifndef PARKLOT_H
#define PARKLOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ParkStatus {
  PARK_STATUS_OK = 0,
  PARK_STATUS_NULL_POINTER = 1,
  PARK_STATUS_INVALID_ARGUMENT = 2,
  PARK_STATUS_BUFFER_TOO_SMALL = 3,
  PARK_STATUS_BAD_MAGIC = 10,
  PARK_STATUS_UNKNOWN_VERSION = 11,
  PARK_STATUS_UNKNOWN_TYPE = 12,
  PARK_STATUS_TRUNCATED = 13,
  PARK_STATUS_CRC_MISMATCH = 14,
  PARK_STATUS_INCONSISTENT_PAYLOAD = 15,
  PARK_STATUS_UNKNOWN_LOT = 20,
  PARK_STATUS_ALREADY_REGISTERED = 21,
  PARK_STATUS_DUPLICATE = 22,
  PARK_STATUS_STALE = 23,
  PARK_STATUS_REJECTED = 24,
  PARK_STATUS_PERSIST_FAILED = 25,
  PARK_STATUS_UNSUPPORTED_LAYOUT = 30,
  /**
   * A panic was caught at the boundary. The handle should be freed.
   */
  PARK_STATUS_INTERNAL = 99,
} ParkStatus;

/**
 * A controller for one lot plus the frames it has produced and the caller
 * has not yet taken.
 */
typedef struct ParkController ParkController;

/**
 * A hub plus per-lot command bytes drained from it but not yet delivered.
 */
typedef struct ParkHub ParkHub;

/**
 * Outcome of one controller tick.
 */
typedef struct ParkTick {
  /**
   * The snapshot changed this tick.
   */
  bool changed;
  /**
   * The entry was refused and the deny signal raised.
   */
  bool denied;
  /**
   * Free slots after the tick.
   */
  uint32_t available;
  /**
   * Bytes now waiting in `park_controller_take_frames`.
   */
  size_t pending_bytes;
} ParkTick;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static, NUL-terminated name of a status code, "Unknown" for anything
 * that is not one. Takes a plain int so any value is safe to pass.
 */
const char *park_status_name(int32_t status);

/**
 * CRC-16/CCITT-FALSE of `len` bytes. A null `data` hashes as empty.
 *
 * # Safety
 * `data` must point to `len` readable bytes or be null.
 */
uint16_t park_crc16(const uint8_t *data, size_t len);

/**
 * Length of the complete, valid frame at the start of `data`, for walking
 * a buffer that holds several frames back to back.
 *
 * # Safety
 * `data` must point to `len` readable bytes and `frame_len` must be valid.
 */
enum ParkStatus park_frame_len(const uint8_t *data, size_t len, size_t *frame_len);

/**
 * Decode one frame at the start of `data` into JSON text.
 *
 * Decode failures return the matching status, so callers that only want
 * validation can pass a null `out` with `*len == 0` and ignore
 * `PARK_STATUS_BUFFER_TOO_SMALL`.
 *
 * # Safety
 * `data` must point to `data_len` readable bytes, `out` to `*len` writable
 * bytes, and `len` must be valid.
 */
enum ParkStatus park_decode_json(const uint8_t *data, size_t data_len, char *out, size_t *len);

/**
 * Create a controller with default timings.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum ParkStatus park_controller_new(uint8_t lot_id,
                                    uint32_t slot_count,
                                    uint32_t debounce_k,
                                    struct ParkController **out);

/**
 * # Safety
 * `c` must come from `park_controller_new` and not be used afterwards.
 */
void park_controller_free(struct ParkController *c);

/**
 * Run one sample period. `raw` holds one byte per slot, 0 or 1.
 *
 * # Safety
 * `c` must be a live controller, `raw` must point to `raw_len` bytes and
 * `result` may be null.
 */
enum ParkStatus park_controller_tick(struct ParkController *c,
                                     uint64_t now_ms,
                                     const uint8_t *raw,
                                     size_t raw_len,
                                     bool entry_detected,
                                     bool vehicle_passed,
                                     struct ParkTick *result);

/**
 * Hand the controller one inbound frame, normally a command from the hub.
 * The acknowledgement comes out with the next tick.
 *
 * # Safety
 * `c` must be a live controller and `data` must point to `len` bytes.
 */
enum ParkStatus park_controller_accept_frame(struct ParkController *c,
                                             const uint8_t *data,
                                             size_t len);

/**
 * Move all pending outbound frames, concatenated, into `out`.
 *
 * # Safety
 * `c` must be a live controller, `out` must point to `*len` writable bytes.
 */
enum ParkStatus park_controller_take_frames(struct ParkController *c, uint8_t *out, size_t *len);

/**
 * The two display lines joined by a newline.
 *
 * # Safety
 * `c` must be a live controller, `out` must point to `*len` writable bytes.
 */
enum ParkStatus park_controller_lcd(struct ParkController *c, char *out, size_t *len);

/**
 * Create an in-memory hub. `heartbeat_ms` of 0 keeps the default.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum ParkStatus park_hub_new(uint64_t heartbeat_ms, struct ParkHub **out);

/**
 * # Safety
 * `h` must come from `park_hub_new` and not be used afterwards by any
 * thread.
 */
void park_hub_free(struct ParkHub *h);

/**
 * # Safety
 * `h` must be a live hub.
 */
enum ParkStatus park_hub_register_lot(const struct ParkHub *h,
                                      uint8_t lot_id,
                                      uint32_t slot_count,
                                      uint64_t now_ms);

/**
 * Ingest one frame. `records` (may be null) receives how many log records
 * it produced. Duplicates and stale frames are reported, not errors in the
 * usual sense: the hub state is unchanged.
 *
 * # Safety
 * `h` must be a live hub and `data` must point to `len` bytes.
 */
enum ParkStatus park_hub_ingest(const struct ParkHub *h,
                                const uint8_t *data,
                                size_t len,
                                uint64_t now_ms,
                                size_t *records);

/**
 * Mark lots offline whose controllers have gone quiet. `records` (may be
 * null) receives the number of records written.
 *
 * # Safety
 * `h` must be a live hub.
 */
enum ParkStatus park_hub_check_liveness(const struct ParkHub *h, uint64_t now_ms, size_t *records);

/**
 * The current lot view as JSON, same shape as the HTTP API.
 *
 * # Safety
 * `h` must be a live hub, `out` must point to `*len` writable bytes.
 */
enum ParkStatus park_hub_snapshot_json(const struct ParkHub *h,
                                       uint8_t lot_id,
                                       char *out,
                                       size_t *len);

/**
 * A JSON array of up to `limit` records with `record_seq > from_seq`.
 *
 * # Safety
 * `h` must be a live hub, `out` must point to `*len` writable bytes.
 */
enum ParkStatus park_hub_history_json(const struct ParkHub *h,
                                      uint8_t lot_id,
                                      uint64_t from_seq,
                                      uint32_t limit,
                                      char *out,
                                      size_t *len);

/**
 * Queue a command given as JSON, for example
 * `{"type":"slot_service","slot":2,"out_of_service":true}`.
 * `command_seq` (may be null) receives the sequence number the
 * acknowledgement will carry.
 *
 * # Safety
 * `h` must be a live hub and `command_json` a NUL-terminated string.
 */
enum ParkStatus park_hub_issue_command(const struct ParkHub *h,
                                       uint8_t lot_id,
                                       const char *command_json,
                                       uint64_t now_ms,
                                       uint16_t *command_seq);

/**
 * Move the command frames waiting for a lot, concatenated, into `out`.
 *
 * # Safety
 * `h` must be a live hub, `out` must point to `*len` writable bytes.
 */
enum ParkStatus park_hub_take_outbound(const struct ParkHub *h,
                                       uint8_t lot_id,
                                       uint8_t *out,
                                       size_t *len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARKLOT_H */
