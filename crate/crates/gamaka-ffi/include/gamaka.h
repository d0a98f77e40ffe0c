/* C interface to the gamaka melodic segmentation and slow-down library. */

#ifndef GAMAKA_H
#define GAMAKA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum GamakaStatus {
  GAMAKA_STATUS_OK = 0,
  // A pointer argument was null.
  GAMAKA_STATUS_NULL_POINTER = 1,
  // A parameter violated its preconditions.
  GAMAKA_STATUS_INVALID_ARGUMENT = 2,
  // File could not be read or written.
  GAMAKA_STATUS_IO_ERROR = 3,
  // WAV encoding outside the supported set, or a damaged file.
  GAMAKA_STATUS_UNSUPPORTED_FORMAT = 4,
  // Analysis or rendering failed.
  GAMAKA_STATUS_ANALYSIS_ERROR = 5,
} GamakaStatus;

// Segment class of one entry in a segmentation.
typedef enum GamakaSegmentKind {
  GAMAKA_SEGMENT_KIND_CP_NOTE = 0,
  GAMAKA_SEGMENT_KIND_TRANSIENT = 1,
  GAMAKA_SEGMENT_KIND_SILENCE = 2,
} GamakaSegmentKind;

// Opaque mono audio buffer.
typedef struct GamakaBuffer GamakaBuffer;

// Opaque segmentation result.
typedef struct GamakaSegmentation GamakaSegmentation;

// One segment, frame indices inclusive. `mean_semitone` is NaN for
// transients and silences.
typedef struct GamakaSegmentInfo {
  enum GamakaSegmentKind kind;
  size_t start_frame;
  size_t end_frame;
  double start_s;
  double end_s;
  double mean_semitone;
} GamakaSegmentInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Wraps a sample array into a buffer handle. Samples must be finite and
// within [-1, 1].
//
// # Safety
// `samples` must point to `len` readable f32 values; `out` must be a valid
// destination for one pointer.
enum GamakaStatus gamaka_buffer_from_samples(const float *samples,
                                             size_t len,
                                             uint32_t sample_rate,
                                             struct GamakaBuffer **out);

// Reads a WAV file (PCM 16-bit or float 32-bit, mono or stereo).
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` a valid destination.
enum GamakaStatus gamaka_buffer_read_wav(const char *path, struct GamakaBuffer **out);

// Writes a buffer as 16-bit PCM mono.
//
// # Safety
// `buf` must be a live handle from this library; `path` a valid string.
enum GamakaStatus gamaka_buffer_write_wav(const struct GamakaBuffer *buf, const char *path);

// Number of samples in a buffer (0 for null).
//
// # Safety
// `buf` must be null or a live handle.
size_t gamaka_buffer_len(const struct GamakaBuffer *buf);

// Sample rate in Hz (0 for null).
//
// # Safety
// `buf` must be null or a live handle.
uint32_t gamaka_buffer_sample_rate(const struct GamakaBuffer *buf);

// Copies up to `capacity` samples into `dst`; returns the count copied.
//
// # Safety
// `dst` must point to `capacity` writable f32 slots.
size_t gamaka_buffer_copy_samples(const struct GamakaBuffer *buf, float *dst, size_t capacity);

// Releases a buffer handle. Null is ignored.
//
// # Safety
// `buf` must be null or a handle not yet freed.
void gamaka_buffer_free(struct GamakaBuffer *buf);

// Synthesizes the built-in kampita fixture (steady 125 Hz, excursion to
// 150 Hz and back over 200 ms).
//
// # Safety
// `out` must be a valid destination for one pointer.
enum GamakaStatus gamaka_synth_kampita(uint32_t sample_rate, struct GamakaBuffer **out);

// Segments a buffer into CP-notes, transients and silence.
// `frame_ms <= 0` selects the default 32 ms frames.
//
// # Safety
// `buf` must be a live handle; `out` a valid destination.
enum GamakaStatus gamaka_segment(const struct GamakaBuffer *buf,
                                 double tonic_hz,
                                 double frame_ms,
                                 struct GamakaSegmentation **out);

// Number of segments (0 for null).
//
// # Safety
// `seg` must be null or a live handle.
size_t gamaka_segmentation_len(const struct GamakaSegmentation *seg);

// Fetches one segment by index.
//
// # Safety
// `seg` must be a live handle; `info` a valid destination.
enum GamakaStatus gamaka_segmentation_at(const struct GamakaSegmentation *seg,
                                         size_t index,
                                         struct GamakaSegmentInfo *info);

// Serializes a segmentation as JSON. Free the string with
// `gamaka_string_free`.
//
// # Safety
// `seg` must be a live handle; `out` a valid destination.
enum GamakaStatus gamaka_segmentation_to_json(const struct GamakaSegmentation *seg, char **out);

// Releases a segmentation handle. Null is ignored.
//
// # Safety
// `seg` must be null or a handle not yet freed.
void gamaka_segmentation_free(struct GamakaSegmentation *seg);

// Frees a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void gamaka_string_free(char *s);

// Slows a buffer down by integer `factor`, leaving transients unscaled and
// capping short CP-notes at `cp_cap_ms` (values <= 0 select 250 ms). Writes
// the achieved factor R' to `r_effective` when non-null.
//
// # Safety
// `buf` must be a live handle; `out` a valid destination; `r_effective`
// null or a valid f64 slot.
enum GamakaStatus gamaka_slowdown(const struct GamakaBuffer *buf,
                                  double tonic_hz,
                                  uint32_t factor,
                                  double cp_cap_ms,
                                  struct GamakaBuffer **out,
                                  double *r_effective);

// Uniform pitch-preserving stretch (the comparison baseline), factor >= 1.
//
// # Safety
// `buf` must be a live handle; `out` a valid destination.
enum GamakaStatus gamaka_uniform_scale(const struct GamakaBuffer *buf,
                                       double factor,
                                       struct GamakaBuffer **out);

// Lower bound on the in-window frequency spread ratio of a linear glide
// from `f0` to `f1` over `tt_ms / 2`, analyzed with a `w_ms` window.
//
// # Safety
// `rho_out` must be null or a valid f64 slot.
enum GamakaStatus gamaka_rho_lower_bound(double f0,
                                         double f1,
                                         double w_ms,
                                         double tt_ms,
                                         double *rho_out);

// Static name of a status code.
const char *gamaka_status_name(enum GamakaStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAMAKA_H */
