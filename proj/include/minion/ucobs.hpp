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

// Self-delimiting datagrams over a uTCP byte stream. Each datagram is COBS
// encoded and wrapped as 0x00 || COBS(payload) || 0x00 in a single write, so a
// receiver holding any hole-free stretch of the stream can find whole records
// by their two markers, regardless of where the segments were cut.

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "minion/common.hpp"
#include "minion/utcp.hpp"

namespace minion::ucobs {

inline constexpr std::size_t kDefaultMaxDatagram = 64 * 1024;

Bytes cobs_encode(ByteView payload);
// nullopt for empty input, an embedded zero, or a truncated group.
std::optional<Bytes> cobs_decode(ByteView encoded);
// Worst-case encoded size for n payload bytes.
inline std::size_t cobs_max_encoded_size(std::size_t n) { return n + 1 + n / 254; }

// 0x00 || COBS(datagram) || 0x00. Throws on empty or oversize datagrams.
Bytes frame(ByteView datagram, std::size_t max_datagram = kDefaultMaxDatagram);

utcp::WriteId send(utcp::Connection& conn, ByteView datagram, std::uint32_t tag = 0,
                   std::uint8_t flags = 0, std::size_t max_datagram = kDefaultMaxDatagram);
utcp::WriteId send(utcp::Host& host, ByteView datagram, std::uint32_t tag = 0,
                   std::uint8_t flags = 0, std::size_t max_datagram = kDefaultMaxDatagram);

// Bytes into a fragment starting at stream offset s until the next boundary of
// f-byte fixed frames. Throws for f == 0.
std::uint64_t fixed_frame_boundary(std::uint64_t f, std::uint64_t s);

enum class InsertResult { New, ExtendedFront, ExtendedBack, MergedHole, Duplicate };
const char* to_string(InsertResult r);

// Disjoint, non-adjacent byte ranges of the sender stream. Bytes below the
// floor have been consumed and are neither stored nor accepted again.
class FragmentMap {
 public:
  // Overlapping bytes must match what is stored; a mismatch throws
  // Error(Integrity).
  InsertResult insert(std::uint64_t offset, ByteView data);

  // Range holding `offset`, if any.
  std::optional<std::pair<std::uint64_t, ByteView>> fragment_at(std::uint64_t offset) const;
  const std::map<std::uint64_t, Bytes>& ranges() const { return ranges_; }
  std::size_t size() const { return ranges_.size(); }
  std::size_t stored_bytes() const;

  // End of the hole-free prefix that starts at the floor.
  std::uint64_t cum_point() const;
  std::uint64_t floor() const { return floor_; }
  // Drops stored bytes below `offset` and refuses them from now on.
  void raise_floor(std::uint64_t offset);

 private:
  std::map<std::uint64_t, Bytes> ranges_;
  std::uint64_t floor_ = 0;
};

struct Datagram {
  std::uint64_t offset = 0;  // stream offset of the leading marker
  Bytes payload;
};

struct ReceiverStats {
  std::uint64_t delivered = 0;
  std::uint64_t malformed = 0;
  std::uint64_t duplicate_units = 0;
};

// Reassembles the stream from DeliveryUnits (in or out of order, possibly
// repeated) and hands up each record once, as soon as its framed bytes are
// all present.
class Receiver {
 public:
  explicit Receiver(std::size_t max_datagram = kDefaultMaxDatagram);

  std::vector<Datagram> on_unit(const utcp::DeliveryUnit& unit);
  std::vector<Datagram> on_bytes(std::uint64_t offset, ByteView data);

  const FragmentMap& fragments() const { return map_; }
  const ReceiverStats& stats() const { return stats_; }

 private:
  void scan(std::uint64_t lo, std::uint64_t hi, std::vector<Datagram>& out);
  void compact();

  std::size_t max_encoded_;
  FragmentMap map_;
  std::set<std::uint64_t> consumed_;  // leading-marker offsets of handled records
  ReceiverStats stats_;
};

}  // namespace minion::ucobs
