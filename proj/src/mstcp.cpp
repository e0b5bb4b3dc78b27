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

#include "minion/mstcp.hpp"

#include "minion/ucobs.hpp"

namespace minion::mstcp {

void encode_header(const ChunkHeader& h, std::uint8_t* out) {
  put_be16(out, h.stream_id);
  put_be16(out + 2, h.stream_seq);
  put_be16(out + 4, h.chunk_index);
  put_be16(out + 6, h.chunk_count);
  put_be32(out + 8, h.payload_len);
  out[12] = h.flags;
  out[13] = out[14] = out[15] = 0;
}

bool valid(const ChunkHeader& h) {
  if (h.chunk_count == 0 || h.chunk_index >= h.chunk_count) return false;
  if (((h.flags & chunk_flags::kFirst) != 0) != (h.chunk_index == 0)) return false;
  if (((h.flags & chunk_flags::kLast) != 0) != (h.chunk_index + 1 == h.chunk_count)) return false;
  return (h.flags & ~(chunk_flags::kFirst | chunk_flags::kLast)) == 0;
}

std::optional<ChunkHeader> decode_header(ByteView b) {
  if (b.size() < kHeaderSize) return std::nullopt;
  if (b[13] != 0 || b[14] != 0 || b[15] != 0) return std::nullopt;
  ChunkHeader h{get_be16(b.data()), get_be16(b.data() + 2), get_be16(b.data() + 4),
                get_be16(b.data() + 6), get_be32(b.data() + 8), b[12]};
  if (!valid(h)) return std::nullopt;
  return h;
}

std::vector<Bytes> make_chunks(std::uint16_t stream_id, std::uint16_t stream_seq, ByteView message,
                               std::size_t chunk_payload) {
  if (message.empty()) throw Error(ErrorCode::InvalidArgument, "empty message");
  if (chunk_payload == 0) throw Error(ErrorCode::InvalidArgument, "chunk payload size must be positive");
  const std::size_t count = (message.size() + chunk_payload - 1) / chunk_payload;
  if (count > 0xFFFF) throw Error(ErrorCode::Oversize, "message needs more than 65535 chunks");
  std::vector<Bytes> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t from = i * chunk_payload;
    const std::size_t len = std::min(chunk_payload, message.size() - from);
    ChunkHeader h;
    h.stream_id = stream_id;
    h.stream_seq = stream_seq;
    h.chunk_index = static_cast<std::uint16_t>(i);
    h.chunk_count = static_cast<std::uint16_t>(count);
    h.payload_len = static_cast<std::uint32_t>(len);
    h.flags = static_cast<std::uint8_t>((i == 0 ? chunk_flags::kFirst : 0) |
                                        (i + 1 == count ? chunk_flags::kLast : 0));
    Bytes d(kHeaderSize + len);
    encode_header(h, d.data());
    std::copy_n(message.begin() + static_cast<std::ptrdiff_t>(from), len, d.begin() + kHeaderSize);
    out.push_back(std::move(d));
  }
  return out;
}

void Sender::track(std::uint16_t stream_id, utcp::WriteId last_write) {
  auto it = streams_.find(stream_id);
  if (it == streams_.end() || it->second.untracked == 0)
    throw Error(ErrorCode::InvalidArgument, "no untracked message on stream " + std::to_string(stream_id));
  --it->second.untracked;
  it->second.unacked.push_back(last_write);
}

// ---------------------------------------------------------------------------

Sender::Sender(std::size_t chunk_payload) : chunk_payload_(chunk_payload) {
  if (chunk_payload_ == 0 || chunk_payload_ > ucobs::kDefaultMaxDatagram - kHeaderSize)
    throw Error(ErrorCode::Config, "chunk payload size out of range");
}

std::size_t Sender::outstanding(std::uint16_t stream_id, const utcp::Connection* conn) {
  auto it = streams_.find(stream_id);
  if (it == streams_.end()) return 0;
  auto& s = it->second;
  if (conn) {
    while (!s.unacked.empty()) {
      auto state = conn->write_state(s.unacked.front());
      if (state != utcp::WriteState::Acked && state != utcp::WriteState::Squashed) break;
      s.unacked.pop_front();
    }
  }
  return s.unacked.size() + s.untracked;
}

std::vector<Bytes> Sender::next_message(std::uint16_t stream_id, ByteView message) {
  auto& s = streams_[stream_id];
  if (s.unacked.size() + s.untracked >= kStreamWindow)
    throw Error(ErrorCode::WindowFull, "stream " + std::to_string(stream_id) + " window full");
  auto chunks = make_chunks(stream_id, s.next_seq, message, chunk_payload_);
  ++s.next_seq;
  ++s.untracked;
  return chunks;
}

void Sender::sendmsg(utcp::Host& host, std::uint16_t stream_id, ByteView message, std::uint32_t tag) {
  outstanding(stream_id, &host.connection());
  auto chunks = next_message(stream_id, message);
  auto& s = streams_[stream_id];
  --s.untracked;
  utcp::WriteId last = 0;
  for (const auto& c : chunks) last = ucobs::send(host, c, tag);
  s.unacked.push_back(last);
}

// ---------------------------------------------------------------------------

std::vector<Message> Receiver::on_datagram(ByteView datagram) {
  std::vector<Message> out;
  auto h = decode_header(datagram);
  if (!h || h->payload_len != datagram.size() - kHeaderSize) {
    ++stats_.malformed;
    return out;
  }
  auto& s = streams_[h->stream_id];
  if (s.dropped) return out;

  const auto diff = static_cast<std::int16_t>(h->stream_seq - static_cast<std::uint16_t>(s.next));
  if (diff < 0) {
    ++stats_.duplicate_chunks;
    return out;
  }
  const std::uint64_t seq = s.next + static_cast<std::uint64_t>(diff);
  auto& p = s.pending[seq];
  if (p.chunk_count == 0) {
    p.chunk_count = h->chunk_count;
    p.chunks.resize(h->chunk_count);
  } else if (p.chunk_count != h->chunk_count) {
    ++stats_.dropped_streams;
    s.dropped = true;
    s.pending.clear();
    return out;
  }
  auto& slot = p.chunks[h->chunk_index];
  if (slot) {
    ++stats_.duplicate_chunks;
    return out;
  }
  slot = Bytes(datagram.begin() + kHeaderSize, datagram.end());
  ++p.received;

  while (!s.pending.empty()) {
    auto head = s.pending.begin();
    if (head->first != s.next || head->second.received != head->second.chunk_count) break;
    Message m;
    m.stream_id = h->stream_id;
    m.stream_seq = static_cast<std::uint16_t>(s.next);
    for (auto& c : head->second.chunks) m.data.insert(m.data.end(), c->begin(), c->end());
    out.push_back(std::move(m));
    ++stats_.released;
    s.pending.erase(head);
    ++s.next;
  }
  return out;
}

std::size_t Receiver::buffered_messages() const {
  std::size_t n = 0;
  for (const auto& [id, s] : streams_) n += s.pending.size();
  return n;
}

bool Receiver::stream_dropped(std::uint16_t stream_id) const {
  auto it = streams_.find(stream_id);
  return it != streams_.end() && it->second.dropped;
}

}  // namespace minion::mstcp
