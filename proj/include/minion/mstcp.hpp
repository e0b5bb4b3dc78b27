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

#pragma once

// Multistreaming over uCOBS datagrams. Messages are cut into chunks, each
// carried in its own datagram behind a 16-byte header:
//
//   stream_id u16 | stream_seq u16 | chunk_index u16 | chunk_count u16 |
//   payload_len u32 | flags u8 | reserved[3]
//
// Messages come out in order within a stream and independently across
// streams.

#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "minion/common.hpp"
#include "minion/utcp.hpp"

namespace minion::mstcp {

inline constexpr std::size_t kHeaderSize = 16;
inline constexpr std::size_t kDefaultChunkPayload = 1408;
inline constexpr std::size_t kStreamWindow = 1u << 15;

namespace chunk_flags {
inline constexpr std::uint8_t kFirst = 0x01;
inline constexpr std::uint8_t kLast = 0x02;
}  // namespace chunk_flags

struct ChunkHeader {
  std::uint16_t stream_id = 0;
  std::uint16_t stream_seq = 0;
  std::uint16_t chunk_index = 0;
  std::uint16_t chunk_count = 1;
  std::uint32_t payload_len = 0;
  std::uint8_t flags = 0;

  bool operator==(const ChunkHeader&) const = default;
};

void encode_header(const ChunkHeader& h, std::uint8_t* out);
// nullopt when the bytes break the header invariants.
std::optional<ChunkHeader> decode_header(ByteView sixteen_bytes);
bool valid(const ChunkHeader& h);

// Splits one message into chunk datagrams (header | payload).
std::vector<Bytes> make_chunks(std::uint16_t stream_id, std::uint16_t stream_seq, ByteView message,
                               std::size_t chunk_payload = kDefaultChunkPayload);

// Per-stream sequence numbering and window accounting. The window counts
// messages whose final chunk the transport has not yet acknowledged.
class Sender {
 public:
  explicit Sender(std::size_t chunk_payload = kDefaultChunkPayload);

  // Chunks of the next message on `stream_id`; throws Error(WindowFull) when
  // the stream already has kStreamWindow unacknowledged messages.
  std::vector<Bytes> next_message(std::uint16_t stream_id, ByteView message);

  // Sends every chunk as one uCOBS datagram with the given tag.
  void sendmsg(utcp::Host& host, std::uint16_t stream_id, ByteView message, std::uint32_t tag = 0);

  // Ties the oldest message produced by next_message on `stream_id` to the
  // write carrying its final chunk, so acknowledgement releases it.
  void track(std::uint16_t stream_id, utcp::WriteId last_write);

  std::size_t outstanding(std::uint16_t stream_id, const utcp::Connection* conn = nullptr);
  std::size_t chunk_payload() const { return chunk_payload_; }

 private:
  struct Stream {
    std::uint16_t next_seq = 0;
    std::deque<utcp::WriteId> unacked;  // last write of each message
    std::size_t untracked = 0;          // messages built without a connection
  };
  std::size_t chunk_payload_;
  std::map<std::uint16_t, Stream> streams_;
};

struct Message {
  std::uint16_t stream_id = 0;
  std::uint16_t stream_seq = 0;
  Bytes data;
  bool operator==(const Message&) const = default;
};

struct ReceiverStats {
  std::uint64_t released = 0;
  std::uint64_t duplicate_chunks = 0;
  std::uint64_t malformed = 0;
  std::uint64_t dropped_streams = 0;
};

class Receiver {
 public:
  std::vector<Message> on_datagram(ByteView datagram);

  const ReceiverStats& stats() const { return stats_; }
  // Messages buffered behind a missing one, all streams.
  std::size_t buffered_messages() const;
  bool stream_dropped(std::uint16_t stream_id) const;

 private:
  struct Partial {
    std::uint16_t chunk_count = 0;
    std::size_t received = 0;
    std::vector<std::optional<Bytes>> chunks;
  };
  struct Stream {
    std::uint64_t next = 0;                 // unwrapped next expected stream_seq
    std::map<std::uint64_t, Partial> pending;
    bool dropped = false;
  };
  std::map<std::uint16_t, Stream> streams_;
  ReceiverStats stats_;
};

}  // namespace minion::mstcp
