#ifndef MMTSS_H
#define MMTSS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MmtssStatus {
  MMTSS_STATUS_OK = 0,
  MMTSS_STATUS_NULL_POINTER = 1,
  MMTSS_STATUS_INVALID_ARGUMENT = 2,
  MMTSS_STATUS_FORMAT = 3,
  MMTSS_STATUS_IO = 4,
  MMTSS_STATUS_BUFFER_TOO_SMALL = 5,
  MMTSS_STATUS_PANIC = 6,
} MmtssStatus;

typedef struct MmtssAttention MmtssAttention;

typedef struct MmtssSpectrogram MmtssSpectrogram;

typedef struct MmtssWaveform MmtssWaveform;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the buffer size needed for the
// whole message, or 0 when the last call succeeded.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t mmtss_last_error_message(char *buf, size_t len);

// Library version, static NUL-terminated string.
const char *mmtss_version(void);

// Builds a waveform from `channels * len` planar samples.
//
// # Safety
// `data` must point to `channels * len` readable doubles; `out` must be writable.
enum MmtssStatus mmtss_waveform_new(const double *data,
                                    size_t channels,
                                    size_t len,
                                    uint32_t sample_rate,
                                    struct MmtssWaveform **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum MmtssStatus mmtss_waveform_read_wav(const char *path, struct MmtssWaveform **out);

// Writes 32-bit float WAV. Without `clip`, a peak above 1 is an error.
//
// # Safety
// `wave` must be a live handle and `path` a NUL-terminated string.
enum MmtssStatus mmtss_waveform_write_wav(const struct MmtssWaveform *wave,
                                          const char *path,
                                          bool clip);

// 0 for a null handle.
//
// # Safety
// `wave` must be null or a live handle.
size_t mmtss_waveform_channels(const struct MmtssWaveform *wave);

// Samples per channel; 0 for a null handle.
//
// # Safety
// `wave` must be null or a live handle.
size_t mmtss_waveform_len(const struct MmtssWaveform *wave);

// # Safety
// `wave` must be null or a live handle.
uint32_t mmtss_waveform_sample_rate(const struct MmtssWaveform *wave);

// Copies the planar samples into `dst`, which must hold `channels * len`.
//
// # Safety
// `wave` must be a live handle; `dst` must point to `dst_len` writable doubles.
enum MmtssStatus mmtss_waveform_copy(const struct MmtssWaveform *wave, double *dst, size_t dst_len);

// # Safety
// `wave` must be null or a handle not yet freed.
void mmtss_waveform_free(struct MmtssWaveform *wave);

// STFT with the default 512-point sqrt-Hann window and hop 256.
//
// # Safety
// `wave` must be a live handle; `out` must be writable.
enum MmtssStatus mmtss_stft(const struct MmtssWaveform *wave, struct MmtssSpectrogram **out);

// Overlap-add inverse of [`mmtss_stft`].
//
// # Safety
// `spec` must be a live handle; `out` must be writable.
enum MmtssStatus mmtss_istft(const struct MmtssSpectrogram *spec, struct MmtssWaveform **out);

// Writes channel, frame and bin counts; any pointer may be null.
//
// # Safety
// `spec` must be a live handle; non-null outputs must be writable.
enum MmtssStatus mmtss_spectrogram_dims(const struct MmtssSpectrogram *spec,
                                        size_t *channels,
                                        size_t *frames,
                                        size_t *freqs);

// Copies real and imaginary parts, `[channels, frames, freqs]` row-major.
//
// # Safety
// `spec` must be a live handle; `re` and `im` must each hold `len` doubles.
enum MmtssStatus mmtss_spectrogram_copy(const struct MmtssSpectrogram *spec,
                                        double *re,
                                        double *im,
                                        size_t len);

// # Safety
// `spec` must be null or a handle not yet freed.
void mmtss_spectrogram_free(struct MmtssSpectrogram *spec);

// Stacked LPS, IPD and DF matrix of a waveform recorded by the default
// 9-microphone linear array, `[rows, frames]` row-major.
//
// With `dst` null only `rows` and `cols` are written, so callers can size
// the buffer first.
//
// # Safety
// `wave` must be a live handle; `rows` and `cols` writable; `dst` null or
// holding `dst_len` doubles.
enum MmtssStatus mmtss_features_stacked(const struct MmtssWaveform *wave,
                                        double target_theta_deg,
                                        bool premask,
                                        double *dst,
                                        size_t dst_len,
                                        size_t *rows,
                                        size_t *cols);

// SI-SDR in dB of `estimate` against `reference`, both `len` samples.
//
// # Safety
// Both inputs must hold `len` doubles; `out` must be writable.
enum MmtssStatus mmtss_si_sdr(const double *estimate,
                              const double *reference,
                              size_t len,
                              double *out);

// Rule-gate weight for an inter-speaker angle in degrees. NaN stands for
// a single-speaker mixture and yields 1.
double mmtss_rule_attention_weight(double angle_deg, double w, double b);

// Gaussian-initialised factorized attention: `heads` subspaces of
// `[input_dim x out_dim]` and a `[modality_dim x heads]` projection.
//
// # Safety
// `out` must be writable.
enum MmtssStatus mmtss_attention_random(uint64_t seed,
                                        size_t input_dim,
                                        size_t modality_dim,
                                        size_t heads,
                                        size_t out_dim,
                                        struct MmtssAttention **out);

// # Safety
// `dir` must be a NUL-terminated string; `out` must be writable.
enum MmtssStatus mmtss_attention_load(const char *dir, struct MmtssAttention **out);

// # Safety
// `params` must be a live handle and `dir` a NUL-terminated string.
enum MmtssStatus mmtss_attention_save(const struct MmtssAttention *params, const char *dir);

// Fused `[frames x out_dim]` output, row-major. `weights` (`[frames x
// heads]`) may be null.
//
// # Safety
// `acoustic` holds `frames * input_dim` doubles, `modality` holds
// `frames * modality_dim`; output buffers hold their stated lengths.
enum MmtssStatus mmtss_attention_forward(const struct MmtssAttention *params,
                                         const double *acoustic,
                                         const double *modality,
                                         size_t frames,
                                         double *fused,
                                         size_t fused_len,
                                         double *weights,
                                         size_t weights_len);

// # Safety
// `params` must be null or a handle not yet freed.
void mmtss_attention_free(struct MmtssAttention *params);

// Simulates mixture `index` of the manifest at `manifest_path` and
// returns the multi-channel mixture. Relative audio paths in the manifest
// resolve against its directory.
//
// # Safety
// `manifest_path` must be a NUL-terminated string; `out` must be writable.
enum MmtssStatus mmtss_simulate_mixture(const char *manifest_path,
                                        uint64_t index,
                                        struct MmtssWaveform **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MMTSS_H */
