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
#include <cstring>

#include "minion/ucobs.hpp"

namespace minion::ucobs {

const char* to_string(InsertResult r) {
  switch (r) {
    case InsertResult::New: return "new";
    case InsertResult::ExtendedFront: return "extended-front";
    case InsertResult::ExtendedBack: return "extended-back";
    case InsertResult::MergedHole: return "merged-hole";
    case InsertResult::Duplicate: return "duplicate";
  }
  return "?";
}

InsertResult FragmentMap::insert(std::uint64_t offset, ByteView data) {
  if (offset + data.size() <= floor_ || data.empty()) return InsertResult::Duplicate;
  if (offset < floor_) {
    data = data.subspan(floor_ - offset);
    offset = floor_;
  }
  const std::uint64_t end = offset + data.size();

  // Ranges touching [offset, end], adjacency included.
  auto first = ranges_.upper_bound(offset);
  if (first != ranges_.begin()) {
    auto prev = std::prev(first);
    if (prev->first + prev->second.size() >= offset) first = prev;
  }
  auto last = first;
  std::size_t touched = 0;
  while (last != ranges_.end() && last->first <= end) {
    // Overlapping bytes must agree.
    const std::uint64_t lo = std::max(offset, last->first);
    const std::uint64_t hi = std::min(end, last->first + last->second.size());
    if (lo < hi && std::memcmp(data.data() + (lo - offset), last->second.data() + (lo - last->first),
                               hi - lo) != 0) {
      throw Error(ErrorCode::Integrity, "overlapping stream bytes differ at offset " +
                                            std::to_string(lo));
    }
    ++last;
    ++touched;
  }

  if (touched == 0) {
    ranges_.emplace_hint(first, offset, Bytes(data.begin(), data.end()));
    return InsertResult::New;
  }

  const std::uint64_t old_lo = first->first;
  const auto before_last = std::prev(last);
  const std::uint64_t old_hi = before_last->first + before_last->second.size();
  if (touched == 1 && old_lo <= offset && end <= old_hi) return InsertResult::Duplicate;

  const std::uint64_t lo = std::min(old_lo, offset);
  const std::uint64_t hi = std::max(old_hi, end);
  InsertResult result;
  if (touched > 1) {
    result = InsertResult::MergedHole;
  } else if (end > old_hi) {
    result = InsertResult::ExtendedBack;
  } else {
    result = InsertResult::ExtendedFront;
  }

  Bytes merged;
  if (lo == old_lo) {
    // Grow the first range in place; the common case is appending.
    merged = std::move(first->second);
    merged.resize(hi - lo);
  } else {
    merged.resize(hi - lo);
  }
  std::memcpy(merged.data() + (offset - lo), data.data(), data.size());
  for (auto it = first; it != last; ++it) {
    if (it == first && lo == old_lo) continue;
    std::memcpy(merged.data() + (it->first - lo), it->second.data(), it->second.size());
  }
  auto hint = ranges_.erase(first, last);
  ranges_.emplace_hint(hint, lo, std::move(merged));
  return result;
}

std::optional<std::pair<std::uint64_t, ByteView>> FragmentMap::fragment_at(std::uint64_t offset) const {
  auto it = ranges_.upper_bound(offset);
  if (it == ranges_.begin()) return std::nullopt;
  --it;
  if (offset >= it->first + it->second.size()) return std::nullopt;
  return std::make_pair(it->first, ByteView(it->second));
}

std::size_t FragmentMap::stored_bytes() const {
  std::size_t n = 0;
  for (const auto& [off, b] : ranges_) n += b.size();
  return n;
}

std::uint64_t FragmentMap::cum_point() const {
  if (ranges_.empty() || ranges_.begin()->first != floor_) return floor_;
  return floor_ + ranges_.begin()->second.size();
}

void FragmentMap::raise_floor(std::uint64_t offset) {
  if (offset <= floor_) return;
  floor_ = offset;
  while (!ranges_.empty()) {
    auto it = ranges_.begin();
    const std::uint64_t e = it->first + it->second.size();
    if (e <= offset) {
      ranges_.erase(it);
    } else {
      if (it->first < offset) {
        auto node = ranges_.extract(it);
        auto& b = node.mapped();
        b.erase(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(offset - node.key()));
        node.key() = offset;
        ranges_.insert(std::move(node));
      }
      break;
    }
  }
}

}  // namespace minion::ucobs
