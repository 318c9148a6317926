#ifndef CRFOUNTAIN_H
#define CRFOUNTAIN_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CrfStatus {
  CRF_STATUS_OK = 0,
  /**
   * The decoder could not certify a unique answer.
   */
  CRF_STATUS_DECODE_FAILED = 1,
  CRF_STATUS_INVALID_ARGUMENT = 2,
  CRF_STATUS_MALFORMED_PACKET = 3,
  CRF_STATUS_NULL_POINTER = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  CRF_STATUS_PANIC = 5,
} CrfStatus;

typedef enum CrfDistribution {
  CRF_DISTRIBUTION_UNIFORM = 0,
  CRF_DISTRIBUTION_LOG_SPARSE = 1,
} CrfDistribution;

typedef enum CrfHeader {
  CRF_HEADER_DENSE = 0,
  CRF_HEADER_INDEX_LIST = 1,
  CRF_HEADER_SEED = 2,
} CrfHeader;

typedef enum CrfAlgorithm {
  CRF_ALGORITHM_BELIEF_PROPAGATION = 0,
  CRF_ALGORITHM_MAJORITY = 1,
  CRF_ALGORITHM_EXHAUSTIVE = 2,
  CRF_ALGORITHM_RANDOMIZED = 3,
} CrfAlgorithm;

typedef struct CrfDecoder CrfDecoder;

typedef struct CrfEncoder CrfEncoder;

/**
 * Bytes owned by the library.
 */
typedef struct CrfBuffer {
  uint8_t *data;
  size_t len;
} CrfBuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or null.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *crf_last_error_message(void);

/**
 * # Safety
 * `buffer` must be null or have been filled by this library and not freed.
 */
void crf_buffer_free(struct CrfBuffer *buffer);

/**
 * Creates an encoder for `message_len` bytes split into `blocks` blocks.
 * `delta` is only read for the log-sparse distribution.
 *
 * # Safety
 * `message` must point to `message_len` bytes and `out` must be writable.
 */
enum CrfStatus crf_encoder_new(const uint8_t *message,
                               size_t message_len,
                               size_t blocks,
                               enum CrfDistribution distribution,
                               double delta,
                               enum CrfHeader header,
                               uint64_t seed,
                               struct CrfEncoder **out);

/**
 * Number of bits per block, which is the `k` a decoder must be created with.
 *
 * # Safety
 * `encoder` must be a live handle.
 */
size_t crf_encoder_block_bits(const struct CrfEncoder *encoder);

/**
 * Serializes the next packet of the stream into `out`.
 *
 * # Safety
 * `encoder` must be a live handle and `out` writable.
 */
enum CrfStatus crf_encoder_next_packet(struct CrfEncoder *encoder, struct CrfBuffer *out);

/**
 * # Safety
 * `encoder` must be null or a handle not yet freed.
 */
void crf_encoder_free(struct CrfEncoder *encoder);

/**
 * Creates a decoder expecting packets over `k`-bit blocks with at most `f`
 * corrupted packets and `epsilon` packets of slack.
 *
 * # Safety
 * `out` must be writable.
 */
enum CrfStatus crf_decoder_new(size_t k,
                               size_t f,
                               size_t epsilon,
                               enum CrfAlgorithm algorithm,
                               uint64_t seed,
                               struct CrfDecoder **out);

/**
 * Adds one serialized packet.
 *
 * # Safety
 * `decoder` must be a live handle and `data` must point to `len` bytes.
 */
enum CrfStatus crf_decoder_add_packet(struct CrfDecoder *decoder, const uint8_t *data, size_t len);

/**
 * # Safety
 * `decoder` must be a live handle.
 */
size_t crf_decoder_packet_count(const struct CrfDecoder *decoder);

/**
 * Decodes the packets added so far. On success `out` holds the blocks
 * concatenated in order, LSB-first, including any zero padding the encoder
 * appended; callers truncate to the original message length.
 *
 * # Safety
 * `decoder` must be a live handle and `out` writable.
 */
enum CrfStatus crf_decoder_decode(struct CrfDecoder *decoder, struct CrfBuffer *out);

/**
 * # Safety
 * `decoder` must be null or a handle not yet freed.
 */
void crf_decoder_free(struct CrfDecoder *decoder);

/**
 * Checks that `data` holds exactly one well-formed packet.
 *
 * # Safety
 * `data` must point to `len` bytes.
 */
enum CrfStatus crf_packet_validate(const uint8_t *data, size_t len);

/**
 * Limit, as the row count grows, of the probability that a uniform random
 * binary matrix with `d` more rows than columns is not of full column rank.
 */
double crf_rank_failure_limit(uint32_t d);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CRFOUNTAIN_H */
