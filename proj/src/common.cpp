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

#include "minion/common.hpp"

#include <cstring>

namespace minion {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Config: return "configuration error";
    case ErrorCode::Closed: return "connection closed";
    case ErrorCode::Oversize: return "oversize";
    case ErrorCode::Malformed: return "malformed";
    case ErrorCode::Integrity: return "integrity fault";
    case ErrorCode::Crypto: return "crypto failure";
    case ErrorCode::Aborted: return "connection aborted";
    case ErrorCode::WindowFull: return "window full";
    case ErrorCode::Io: return "i/o error";
  }
  return "unknown";
}

void SplitMix64::fill(std::span<std::uint8_t> out) {
  std::size_t i = 0;
  while (i + 8 <= out.size()) {
    std::uint64_t v = next();
    std::memcpy(out.data() + i, &v, 8);
    i += 8;
  }
  if (i < out.size()) {
    std::uint64_t v = next();
    std::memcpy(out.data() + i, &v, out.size() - i);
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  // FNV-1a over the label, mixed with the seed through one SplitMix64 step.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : purpose) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  SplitMix64 mix(seed ^ h);
  return mix.next();
}

std::uint64_t unwrap32(std::uint32_t value, std::uint64_t reference) {
  const auto ref_low = static_cast<std::uint32_t>(reference);
  const auto delta = static_cast<std::int32_t>(value - ref_low);
  const auto result = static_cast<std::int64_t>(reference) + delta;
  return result < 0 ? static_cast<std::uint64_t>(result + (std::int64_t{1} << 32))
                    : static_cast<std::uint64_t>(result);
}

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

namespace {
int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(ErrorCode::InvalidArgument, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(ErrorCode::InvalidArgument, "invalid hex digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

}  // namespace minion
