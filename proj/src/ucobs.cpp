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

#include <algorithm>

#include "minion/ucobs.hpp"

namespace minion::ucobs {

utcp::WriteId send(utcp::Connection& conn, ByteView datagram, std::uint32_t tag,
                   std::uint8_t flags, std::size_t max_datagram) {
  return conn.write(frame(datagram, max_datagram), flags, tag);
}

utcp::WriteId send(utcp::Host& host, ByteView datagram, std::uint32_t tag, std::uint8_t flags,
                   std::size_t max_datagram) {
  return host.write(frame(datagram, max_datagram), flags, tag);
}

Receiver::Receiver(std::size_t max_datagram)
    : max_encoded_(cobs_max_encoded_size(max_datagram)) {}

std::vector<Datagram> Receiver::on_unit(const utcp::DeliveryUnit& unit) {
  return on_bytes(unwrap32(unit.offset, map_.cum_point()), unit.data);
}

std::vector<Datagram> Receiver::on_bytes(std::uint64_t offset, ByteView data) {
  std::vector<Datagram> out;
  if (map_.insert(offset, data) == InsertResult::Duplicate) {
    ++stats_.duplicate_units;
    return out;
  }
  const std::uint64_t lo = std::max(offset, map_.floor());
  scan(lo, offset + data.size(), out);
  compact();
  return out;
}

void Receiver::scan(std::uint64_t lo, std::uint64_t hi, std::vector<Datagram>& out) {
  auto frag = map_.fragment_at(lo);
  if (!frag) return;
  const std::uint64_t base = frag->first;
  const ByteView bytes = frag->second;
  const std::size_t reach = max_encoded_ + 2;

  // Widen [lo, hi) to the nearest marker on each side so that records
  // straddling the new bytes are seen whole.
  std::size_t begin = static_cast<std::size_t>(lo - base);
  const std::size_t back_limit = begin > reach ? begin - reach : 0;
  for (std::size_t i = begin; i-- > back_limit;) {
    if (bytes[i] == 0) {
      begin = i;
      break;
    }
  }
  std::size_t end = static_cast<std::size_t>(std::min<std::uint64_t>(hi - base, bytes.size()));
  const std::size_t fwd_limit = std::min(bytes.size(), end + reach);
  for (std::size_t i = end; i < fwd_limit; ++i) {
    if (bytes[i] == 0) {
      end = i + 1;
      break;
    }
  }

  std::optional<std::size_t> open;
  for (std::size_t i = begin; i < end; ++i) {
    if (bytes[i] != 0) continue;
    if (open && i > *open + 1) {
      const std::uint64_t start = base + *open;
      if (consumed_.insert(start).second) {
        const ByteView interior = bytes.subspan(*open + 1, i - *open - 1);
        auto decoded = interior.size() <= max_encoded_ ? cobs_decode(interior) : std::nullopt;
        if (decoded) {
          ++stats_.delivered;
          out.push_back(Datagram{start, std::move(*decoded)});
        } else {
          ++stats_.malformed;
        }
      }
    }
    open = i;
  }
}

void Receiver::compact() {
  // Everything before the last marker of the hole-free prefix has been
  // scanned; drop it once it is worth the copy.
  const std::uint64_t floor = map_.floor();
  const std::uint64_t cum = map_.cum_point();
  const std::size_t threshold = std::max<std::size_t>(64 * 1024, max_encoded_);
  if (cum - floor < threshold) return;
  auto frag = map_.fragment_at(floor);
  const ByteView bytes = frag->second;
  std::size_t last = bytes.size();
  while (last-- > 0 && bytes[last] != 0) {
  }
  if (last == static_cast<std::size_t>(-1) || last == 0) return;
  const std::uint64_t cut = floor + last;
  map_.raise_floor(cut);
  consumed_.erase(consumed_.begin(), consumed_.lower_bound(cut));
}

}  // namespace minion::ucobs
