#ifndef FEDVIT_H
#define FEDVIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Library errors use the same numbers as the CLI exit codes.
 */
typedef enum {
  FEDVIT_STATUS_OK = 0,
  FEDVIT_STATUS_NULL_POINTER = 1,
  FEDVIT_STATUS_INVALID_ARGUMENT = 2,
  FEDVIT_STATUS_BUFFER_TOO_SMALL = 3,
  FEDVIT_STATUS_PANIC = 4,
  FEDVIT_STATUS_CONTRACT = 10,
  FEDVIT_STATUS_CONFIG = 11,
  FEDVIT_STATUS_BUDGET_EXHAUSTED = 12,
  FEDVIT_STATUS_MISSING_GALOIS_KEY = 13,
  FEDVIT_STATUS_NUMERICAL = 14,
  FEDVIT_STATUS_NON_FINITE = 15,
  FEDVIT_STATUS_DIVERGED = 16,
  FEDVIT_STATUS_BAD_MAGIC = 20,
  FEDVIT_STATUS_UNSUPPORTED_VERSION = 21,
  FEDVIT_STATUS_CHECKSUM_MISMATCH = 22,
  FEDVIT_STATUS_TRUNCATED = 23,
  FEDVIT_STATUS_MALFORMED = 24,
  FEDVIT_STATUS_IO = 30,
} FedvitStatus;

/**
 * One ciphertext.
 */
typedef struct FedvitCiphertext FedvitCiphertext;

/**
 * Parameters, a key set and the encryption RNG.
 */
typedef struct FedvitContext FedvitContext;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a context for `profile` ("paper" or "small") with keys derived from `seed`.
 *
 * # Safety
 * `profile` must be a NUL-terminated string and `out` a valid pointer.
 */
FedvitStatus fedvit_context_new(const char *profile, uint64_t seed, FedvitContext **out);

/**
 * # Safety
 * `ctx` must come from [`fedvit_context_new`] and not be used afterwards. Null is ignored.
 */
void fedvit_context_free(FedvitContext *ctx);

/**
 * Slots per ciphertext, or 0 for a null context.
 *
 * # Safety
 * `ctx` must be null or a live context.
 */
size_t fedvit_slot_count(const FedvitContext *ctx);

/**
 * Number of ciphertexts needed for a `dim`-element vector.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
FedvitStatus fedvit_chunk_count(size_t dim, size_t slot_count, size_t *out);

/**
 * Encrypts `len <= slot_count` values at the top level.
 *
 * # Safety
 * `values` must point to `len` doubles; `ctx` and `out` must be valid.
 */
FedvitStatus fedvit_encrypt(FedvitContext *ctx,
                            const double *values,
                            size_t len,
                            FedvitCiphertext **out);

/**
 * Decrypts the first `len` slots into `out`.
 *
 * # Safety
 * `out` must have room for `len` doubles; handles must be live.
 */
FedvitStatus fedvit_decrypt(const FedvitContext *ctx,
                            const FedvitCiphertext *ct,
                            double *out,
                            size_t len);

/**
 * Homomorphic sum of two ciphertexts at the same level and scale.
 *
 * # Safety
 * All handles and `out` must be valid.
 */
FedvitStatus fedvit_add(const FedvitContext *ctx,
                        const FedvitCiphertext *a,
                        const FedvitCiphertext *b,
                        FedvitCiphertext **out);

/**
 * Encrypted elementwise mean of `n` ciphertexts. Consumes one level.
 *
 * # Safety
 * `cts` must point to `n` live ciphertext handles.
 */
FedvitStatus fedvit_aggregate_mean(const FedvitContext *ctx,
                                   const FedvitCiphertext *const *cts,
                                   size_t n,
                                   FedvitCiphertext **out);

/**
 * Modulus level of a ciphertext, or 0 for null.
 *
 * # Safety
 * `ct` must be null or live.
 */
size_t fedvit_ciphertext_level(const FedvitCiphertext *ct);

/**
 * Exact serialized length in bytes, or 0 for null.
 *
 * # Safety
 * `ct` must be null or live.
 */
size_t fedvit_ciphertext_size(const FedvitCiphertext *ct);

/**
 * Writes the wire encoding into `buf`. `written` always receives the required
 * length, so a call with `cap = 0` can be used to size the buffer.
 *
 * # Safety
 * `buf` must have room for `cap` bytes.
 */
FedvitStatus fedvit_serialize(const FedvitCiphertext *ct,
                              uint8_t *buf,
                              size_t cap,
                              size_t *written);

/**
 * Parses and validates a serialized ciphertext.
 *
 * # Safety
 * `buf` must point to `len` readable bytes.
 */
FedvitStatus fedvit_deserialize(const FedvitContext *ctx,
                                const uint8_t *buf,
                                size_t len,
                                FedvitCiphertext **out);

/**
 * # Safety
 * `ct` must come from this library and not be used afterwards. Null is ignored.
 */
void fedvit_ciphertext_free(FedvitCiphertext *ct);

/**
 * Copies the last error message on this thread into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must have room for `cap` bytes or be null with `cap = 0`.
 */
size_t fedvit_last_error(char *buf, size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEDVIT_H */
