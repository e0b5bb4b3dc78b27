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

#include <cstring>
#include <deque>
#include <fstream>
#include <new>
#include <sstream>

#include "minion/harness.hpp"
#include "minion/minion.h"
#include "minion/mstcp.hpp"
#include "minion/netsim.hpp"
#include "minion/ucobs.hpp"

using namespace minion;

struct minion_ucobs_receiver {
  explicit minion_ucobs_receiver(std::size_t max) : rx(max) {}
  ucobs::Receiver rx;
  std::deque<ucobs::Datagram> ready;
};

struct minion_experiment {
  harness::ExperimentSpec spec;
  std::vector<harness::SummaryRow> summary;
};

namespace {

thread_local std::string last_error;

minion_status status_of(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return MINION_ERR_INVALID_ARGUMENT;
    case ErrorCode::Config: return MINION_ERR_CONFIG;
    case ErrorCode::Closed: return MINION_ERR_CLOSED;
    case ErrorCode::Oversize: return MINION_ERR_OVERSIZE;
    case ErrorCode::Malformed: return MINION_ERR_MALFORMED;
    case ErrorCode::Integrity: return MINION_ERR_INTEGRITY;
    case ErrorCode::Crypto: return MINION_ERR_CRYPTO;
    case ErrorCode::Aborted: return MINION_ERR_ABORTED;
    case ErrorCode::WindowFull: return MINION_ERR_WINDOW_FULL;
    case ErrorCode::Io: return MINION_ERR_IO;
  }
  return MINION_ERR_INTERNAL;
}

minion_status fail(minion_status s, std::string msg) {
  last_error = std::move(msg);
  return s;
}

// Runs `f`, mapping exceptions to status codes.
template <typename F>
minion_status guarded(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (const Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(MINION_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MINION_ERR_INTERNAL, e.what());
  }
}

minion_status copy_out(ByteView src, uint8_t* out, size_t* out_len) {
  if (!out_len) return fail(MINION_ERR_INVALID_ARGUMENT, "null length pointer");
  const size_t cap = *out_len;
  *out_len = src.size();
  if (cap < src.size()) return fail(MINION_ERR_BUFFER_TOO_SMALL, "output buffer too small");
  if (!src.empty()) {
    if (!out) return fail(MINION_ERR_INVALID_ARGUMENT, "null output buffer");
    std::memcpy(out, src.data(), src.size());
  }
  return MINION_OK;
}

ByteView view(const uint8_t* data, size_t len) { return ByteView(data, data ? len : 0); }

}  // namespace

extern "C" {

const char* minion_version(void) { return "0.1.0"; }

const char* minion_status_string(minion_status status) {
  switch (status) {
    case MINION_OK: return "ok";
    case MINION_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case MINION_ERR_INTERNAL: return "internal error";
    default: break;
  }
  if (status > MINION_OK && status <= MINION_ERR_IO)
    return to_string(static_cast<ErrorCode>(static_cast<int>(status) - 1));
  return "unknown status";
}

const char* minion_last_error(void) { return last_error.c_str(); }

size_t minion_cobs_max_encoded_size(size_t n) { return ucobs::cobs_max_encoded_size(n); }

minion_status minion_cobs_encode(const uint8_t* data, size_t len, uint8_t* out, size_t* out_len) {
  return guarded([&] {
    if (!data && len) return fail(MINION_ERR_INVALID_ARGUMENT, "null input");
    return copy_out(ucobs::cobs_encode(view(data, len)), out, out_len);
  });
}

minion_status minion_cobs_decode(const uint8_t* data, size_t len, uint8_t* out, size_t* out_len) {
  return guarded([&] {
    if (!data && len) return fail(MINION_ERR_INVALID_ARGUMENT, "null input");
    auto d = ucobs::cobs_decode(view(data, len));
    if (!d) return fail(MINION_ERR_MALFORMED, "invalid COBS encoding");
    return copy_out(*d, out, out_len);
  });
}

minion_status minion_fixed_frame_boundary(uint64_t frame_size, uint64_t offset, uint64_t* out) {
  return guarded([&] {
    if (!out) return fail(MINION_ERR_INVALID_ARGUMENT, "null output");
    *out = ucobs::fixed_frame_boundary(frame_size, offset);
    return MINION_OK;
  });
}

minion_status minion_ucobs_receiver_create(size_t max_datagram, minion_ucobs_receiver** out) {
  return guarded([&] {
    if (!out) return fail(MINION_ERR_INVALID_ARGUMENT, "null output");
    if (max_datagram == 0) return fail(MINION_ERR_INVALID_ARGUMENT, "max_datagram must be positive");
    *out = new minion_ucobs_receiver(max_datagram);
    return MINION_OK;
  });
}

void minion_ucobs_receiver_destroy(minion_ucobs_receiver* rx) { delete rx; }

minion_status minion_ucobs_receiver_feed(minion_ucobs_receiver* rx, uint64_t offset, const uint8_t* data, size_t len,
                                         size_t* ready) {
  return guarded([&] {
    if (!rx || (!data && len)) return fail(MINION_ERR_INVALID_ARGUMENT, "null argument");
    for (auto& d : rx->rx.on_bytes(offset, view(data, len))) rx->ready.push_back(std::move(d));
    if (ready) *ready = rx->ready.size();
    return MINION_OK;
  });
}

minion_status minion_ucobs_receiver_pop(minion_ucobs_receiver* rx, uint64_t* offset, uint8_t* out, size_t* len) {
  return guarded([&] {
    if (!rx) return fail(MINION_ERR_INVALID_ARGUMENT, "null receiver");
    if (rx->ready.empty()) return fail(MINION_ERR_CLOSED, "no datagram pending");
    const auto& d = rx->ready.front();
    auto s = copy_out(d.payload, out, len);
    if (s != MINION_OK) return s;
    if (offset) *offset = d.offset;
    rx->ready.pop_front();
    return MINION_OK;
  });
}

minion_status minion_chunk_header_encode(const minion_chunk_header* h, uint8_t out[16]) {
  return guarded([&] {
    if (!h || !out) return fail(MINION_ERR_INVALID_ARGUMENT, "null argument");
    mstcp::ChunkHeader c{h->stream_id, h->stream_seq, h->chunk_index, h->chunk_count, h->payload_len, h->flags};
    if (!mstcp::valid(c)) return fail(MINION_ERR_MALFORMED, "chunk header breaks its invariants");
    mstcp::encode_header(c, out);
    return MINION_OK;
  });
}

minion_status minion_chunk_header_decode(const uint8_t in[16], minion_chunk_header* h) {
  return guarded([&] {
    if (!in || !h) return fail(MINION_ERR_INVALID_ARGUMENT, "null argument");
    auto c = mstcp::decode_header(ByteView(in, mstcp::kHeaderSize));
    if (!c) return fail(MINION_ERR_MALFORMED, "invalid chunk header");
    *h = {c->stream_id, c->stream_seq, c->chunk_index, c->chunk_count, c->payload_len, c->flags};
    return MINION_OK;
  });
}

minion_status minion_experiment_create(const char* name, minion_experiment** out) {
  return guarded([&] {
    if (!name || !out) return fail(MINION_ERR_INVALID_ARGUMENT, "null argument");
    auto e = std::make_unique<minion_experiment>();
    e->spec = harness::default_spec(name);
    *out = e.release();
    return MINION_OK;
  });
}

void minion_experiment_destroy(minion_experiment* e) { delete e; }

minion_status minion_experiment_set(minion_experiment* e, const char* key, const char* value) {
  return guarded([&] {
    if (!e || !key || !value) return fail(MINION_ERR_INVALID_ARGUMENT, "null argument");
    harness::apply_setting(e->spec, key, value);
    return MINION_OK;
  });
}

minion_status minion_experiment_load_config(minion_experiment* e, const char* path) {
  return guarded([&] {
    if (!e || !path) return fail(MINION_ERR_INVALID_ARGUMENT, "null argument");
    std::ifstream in(path, std::ios::binary);
    if (!in) return fail(MINION_ERR_IO, std::string("cannot open ") + path);
    std::stringstream ss;
    ss << in.rdbuf();
    harness::apply_config(e->spec, ss.str());
    return MINION_OK;
  });
}

minion_status minion_experiment_run(minion_experiment* e, const char* out_dir) {
  return guarded([&] {
    if (!e || !out_dir) return fail(MINION_ERR_INVALID_ARGUMENT, "null argument");
    e->summary.clear();
    e->summary = harness::run_experiment(e->spec, out_dir);
    return MINION_OK;
  });
}

size_t minion_experiment_summary_count(const minion_experiment* e) { return e ? e->summary.size() : 0; }

minion_status minion_experiment_summary_row(const minion_experiment* e, size_t i, const char** mode, uint64_t* seed,
                                            const char** metric, double* value) {
  return guarded([&] {
    if (!e) return fail(MINION_ERR_INVALID_ARGUMENT, "null experiment");
    if (i >= e->summary.size()) return fail(MINION_ERR_INVALID_ARGUMENT, "summary index out of range");
    const auto& r = e->summary[i];
    if (mode) *mode = r.mode.c_str();
    if (seed) *seed = r.seed;
    if (metric) *metric = r.metric.c_str();
    if (value) *value = r.value;
    return MINION_OK;
  });
}

minion_status minion_trace_run(const char* config, const char* workload, int64_t until_ms, int unordered_recv,
                               int unordered_send, const char* trace_path) {
  return guarded([&] {
    if (!workload || !trace_path) return fail(MINION_ERR_INVALID_ARGUMENT, "null argument");
    if (until_ms <= 0) return fail(MINION_ERR_INVALID_ARGUMENT, "until_ms must be positive");
    const auto cfg = config ? netsim::parse_config(config) : netsim::SimConfig{};
    netsim::RunOptions opts;
    opts.unordered_recv = unordered_recv != 0;
    opts.unordered_send = unordered_send != 0;
    const auto trace = netsim::run(cfg, netsim::parse_workload(workload), until_ms * kMillisecond, opts);
    std::ofstream out(trace_path, std::ios::binary | std::ios::trunc);
    if (!out) return fail(MINION_ERR_IO, std::string("cannot open ") + trace_path + " for writing");
    trace.write_csv(out);
    out.flush();
    if (!out) return fail(MINION_ERR_IO, std::string("write to ") + trace_path + " failed");
    return MINION_OK;
  });
}

}  // extern "C"
