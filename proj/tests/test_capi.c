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

/* Exercises the C interface from C, linking only the shared library. */

#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "minion/minion.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

static void test_cobs(void) {
  const uint8_t in[] = {0x11, 0x22, 0x00, 0x33};
  const uint8_t want[] = {0x03, 0x11, 0x22, 0x02, 0x33};
  uint8_t enc[16], dec[16];
  size_t n = 2;
  EXPECT(minion_cobs_encode(in, sizeof in, enc, &n) == MINION_ERR_BUFFER_TOO_SMALL);
  EXPECT(n == sizeof want);
  n = sizeof enc;
  EXPECT(minion_cobs_encode(in, sizeof in, enc, &n) == MINION_OK);
  EXPECT(n == sizeof want && memcmp(enc, want, n) == 0);
  EXPECT(minion_cobs_max_encoded_size(254) >= 255);

  size_t m = sizeof dec;
  EXPECT(minion_cobs_decode(enc, n, dec, &m) == MINION_OK);
  EXPECT(m == sizeof in && memcmp(dec, in, m) == 0);
  const uint8_t bad[] = {0x05, 0x11};
  m = sizeof dec;
  EXPECT(minion_cobs_decode(bad, sizeof bad, dec, &m) == MINION_ERR_MALFORMED);
  EXPECT(strlen(minion_last_error()) > 0);
  EXPECT(minion_cobs_encode(NULL, 1, enc, &n) == MINION_ERR_INVALID_ARGUMENT);

  uint64_t b = 0;
  /* Bytes to skip from offset 1200 to reach the next 500-byte frame start. */
  EXPECT(minion_fixed_frame_boundary(500, 1200, &b) == MINION_OK && b == 300);
  EXPECT(minion_fixed_frame_boundary(0, 1, &b) == MINION_ERR_INVALID_ARGUMENT);
}

static void test_receiver(void) {
  /* Two framed datagrams "A" and "BC": 00 02 41 00 | 00 03 42 43 00 */
  const uint8_t stream[] = {0x00, 0x02, 0x41, 0x00, 0x00, 0x03, 0x42, 0x43, 0x00};
  minion_ucobs_receiver* rx = NULL;
  EXPECT(minion_ucobs_receiver_create(1 << 16, &rx) == MINION_OK);
  size_t ready = 0;
  /* Second datagram first: it is delivered without waiting. */
  EXPECT(minion_ucobs_receiver_feed(rx, 4, stream + 4, 5, &ready) == MINION_OK);
  EXPECT(ready == 1);
  uint8_t out[8];
  size_t len = 1;
  uint64_t off = 0;
  EXPECT(minion_ucobs_receiver_pop(rx, &off, out, &len) == MINION_ERR_BUFFER_TOO_SMALL);
  EXPECT(len == 2);
  len = sizeof out;
  EXPECT(minion_ucobs_receiver_pop(rx, &off, out, &len) == MINION_OK);
  EXPECT(len == 2 && out[0] == 0x42 && out[1] == 0x43 && off == 4);
  EXPECT(minion_ucobs_receiver_feed(rx, 0, stream, 4, &ready) == MINION_OK);
  EXPECT(ready == 1);
  len = sizeof out;
  EXPECT(minion_ucobs_receiver_pop(rx, &off, out, &len) == MINION_OK);
  EXPECT(len == 1 && out[0] == 0x41 && off == 0);
  EXPECT(minion_ucobs_receiver_pop(rx, &off, out, &len) != MINION_OK);
  minion_ucobs_receiver_destroy(rx);
  minion_ucobs_receiver_destroy(NULL);
}

static void test_chunk_header(void) {
  minion_chunk_header h = {7, 65535, 1, 3, 1408, 0};
  uint8_t buf[16];
  EXPECT(minion_chunk_header_encode(&h, buf) == MINION_OK);
  const uint8_t want[16] = {0, 7, 0xff, 0xff, 0, 1, 0, 3, 0, 0, 0x05, 0x80, 0, 0, 0, 0};
  EXPECT(memcmp(buf, want, 16) == 0);
  minion_chunk_header back;
  EXPECT(minion_chunk_header_decode(buf, &back) == MINION_OK);
  EXPECT(back.stream_id == 7 && back.stream_seq == 65535 && back.chunk_index == 1 && back.chunk_count == 3 &&
         back.payload_len == 1408 && back.flags == 0);
  buf[14] = 1;
  EXPECT(minion_chunk_header_decode(buf, &back) == MINION_ERR_MALFORMED);
  h.chunk_count = 0;
  EXPECT(minion_chunk_header_encode(&h, buf) == MINION_ERR_MALFORMED);
}

static void test_experiment(const char* dir) {
  minion_experiment* e = NULL;
  EXPECT(minion_experiment_create("nope", &e) == MINION_ERR_CONFIG);
  EXPECT(minion_experiment_create("fixed-rate", &e) == MINION_OK);
  EXPECT(minion_experiment_set(e, "count", "50") == MINION_OK);
  EXPECT(minion_experiment_set(e, "mode", "utcp") == MINION_OK);
  EXPECT(minion_experiment_set(e, "seeds", "2") == MINION_OK);
  EXPECT(minion_experiment_set(e, "bogus", "1") == MINION_ERR_CONFIG);
  EXPECT(minion_experiment_run(e, dir) == MINION_OK);
  size_t n = minion_experiment_summary_count(e);
  EXPECT(n > 0);
  int saw_delayed = 0;
  uint64_t first_seed = 0;
  for (size_t i = 0; i < n; ++i) {
    const char* mode = NULL;
    const char* metric = NULL;
    uint64_t seed = 99;
    double value = -1;
    EXPECT(minion_experiment_summary_row(e, i, &mode, &seed, &metric, &value) == MINION_OK);
    EXPECT(strcmp(mode, "utcp") == 0);
    if (i == 0) first_seed = seed;
    EXPECT(seed - first_seed < 2);
    if (strcmp(metric, "delayed_fraction") == 0) saw_delayed = 1;
  }
  EXPECT(saw_delayed);
  EXPECT(minion_experiment_summary_row(e, n, NULL, NULL, NULL, NULL) == MINION_ERR_INVALID_ARGUMENT);
  minion_experiment_destroy(e);
}

static void test_trace(const char* dir) {
  char path[4096];
  snprintf(path, sizeof path, "%s/trace.csv", dir);
  EXPECT(minion_trace_run("rtt=60\nloss=0", "0 server 3000\n", 2000, 1, 1, path) == MINION_OK);
  FILE* f = fopen(path, "r");
  EXPECT(f != NULL);
  if (f) {
    int lines = 0;
    char line[512];
    while (fgets(line, sizeof line, f)) ++lines;
    fclose(f);
    EXPECT(lines > 4);
  }
  EXPECT(minion_trace_run(NULL, "0 nowhere 10\n", 100, 0, 0, path) == MINION_ERR_CONFIG);
}

int main(int argc, char** argv) {
  const char* dir = argc > 1 ? argv[1] : ".";
  EXPECT(strlen(minion_version()) > 0);
  EXPECT(strcmp(minion_status_string(MINION_OK), minion_status_string(MINION_ERR_IO)) != 0);
  test_cobs();
  test_receiver();
  test_chunk_header();
  test_experiment(dir);
  test_trace(dir);
  if (failures) {
    fprintf(stderr, "%d failures\n", failures);
    return EXIT_FAILURE;
  }
  printf("capi: all checks passed\n");
  return EXIT_SUCCESS;
}
