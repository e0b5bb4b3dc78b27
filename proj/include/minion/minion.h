/*
 * Copyright 2026 The minion-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MINION_MINION_H
#define MINION_MINION_H

/* C interface to the minion library. All functions return a status code;
 * on failure minion_last_error() describes the problem for the calling
 * thread. Handles are opaque and owned by the caller until destroyed. */

#include <stddef.h>
#include <stdint.h>

#if defined(MINION_BUILDING_LIBRARY)
#define MINION_API __attribute__((visibility("default")))
#else
#define MINION_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum minion_status {
  MINION_OK = 0,
  MINION_ERR_INVALID_ARGUMENT = 1,
  MINION_ERR_CONFIG = 2,
  MINION_ERR_CLOSED = 3,
  MINION_ERR_OVERSIZE = 4,
  MINION_ERR_MALFORMED = 5,
  MINION_ERR_INTEGRITY = 6,
  MINION_ERR_CRYPTO = 7,
  MINION_ERR_ABORTED = 8,
  MINION_ERR_WINDOW_FULL = 9,
  MINION_ERR_IO = 10,
  MINION_ERR_BUFFER_TOO_SMALL = 11,
  MINION_ERR_INTERNAL = 12
} minion_status;

MINION_API const char* minion_version(void);
MINION_API const char* minion_status_string(minion_status status);
/* Message of the last failed call on this thread; "" if none. */
MINION_API const char* minion_last_error(void);

/* COBS. `out_len` is in/out: capacity on entry, bytes written on return.
 * MINION_ERR_BUFFER_TOO_SMALL reports the needed size in *out_len. */
MINION_API size_t minion_cobs_max_encoded_size(size_t n);
MINION_API minion_status minion_cobs_encode(const uint8_t* data, size_t len, uint8_t* out, size_t* out_len);
MINION_API minion_status minion_cobs_decode(const uint8_t* data, size_t len, uint8_t* out, size_t* out_len);
MINION_API minion_status minion_fixed_frame_boundary(uint64_t frame_size, uint64_t offset, uint64_t* out);

/* uCOBS receiver: feed stream fragments, pop whole datagrams. */
typedef struct minion_ucobs_receiver minion_ucobs_receiver;
MINION_API minion_status minion_ucobs_receiver_create(size_t max_datagram, minion_ucobs_receiver** out);
MINION_API void minion_ucobs_receiver_destroy(minion_ucobs_receiver* rx);
MINION_API minion_status minion_ucobs_receiver_feed(minion_ucobs_receiver* rx, uint64_t offset, const uint8_t* data,
                                                    size_t len, size_t* ready);
/* Pops the oldest pending datagram. `len` is in/out as for encode. */
MINION_API minion_status minion_ucobs_receiver_pop(minion_ucobs_receiver* rx, uint64_t* offset, uint8_t* out,
                                                   size_t* len);

/* msTCP chunk header (16 bytes). */
typedef struct minion_chunk_header {
  uint16_t stream_id;
  uint16_t stream_seq;
  uint16_t chunk_index;
  uint16_t chunk_count;
  uint32_t payload_len;
  uint8_t flags;
} minion_chunk_header;
MINION_API minion_status minion_chunk_header_encode(const minion_chunk_header* h, uint8_t out[16]);
MINION_API minion_status minion_chunk_header_decode(const uint8_t in[16], minion_chunk_header* h);

/* Experiments. Settings use the same keys as the CLI config file. */
typedef struct minion_experiment minion_experiment;
MINION_API minion_status minion_experiment_create(const char* name, minion_experiment** out);
MINION_API void minion_experiment_destroy(minion_experiment* e);
MINION_API minion_status minion_experiment_set(minion_experiment* e, const char* key, const char* value);
MINION_API minion_status minion_experiment_load_config(minion_experiment* e, const char* path);
/* Runs every seed and writes CSV files into out_dir. */
MINION_API minion_status minion_experiment_run(minion_experiment* e, const char* out_dir);
/* After a run: number of summary rows, and row i. Strings stay valid until
 * the next run or destroy. */
MINION_API size_t minion_experiment_summary_count(const minion_experiment* e);
MINION_API minion_status minion_experiment_summary_row(const minion_experiment* e, size_t i, const char** mode,
                                                       uint64_t* seed, const char** metric, double* value);

/* Runs a scripted single-connection workload and writes the event trace CSV
 * to `trace_path`. `config` is key=value text (may be NULL). */
MINION_API minion_status minion_trace_run(const char* config, const char* workload, int64_t until_ms,
                                          int unordered_recv, int unordered_send, const char* trace_path);

#ifdef __cplusplus
}
#endif

#endif
