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

#include "minion/ucobs.hpp"

namespace minion::ucobs {

Bytes cobs_encode(ByteView payload) {
  Bytes out;
  out.reserve(cobs_max_encoded_size(payload.size()));
  std::size_t code_at = out.size();
  out.push_back(0);
  std::uint8_t code = 1;
  for (std::size_t i = 0; i < payload.size(); ++i) {
    const std::uint8_t b = payload[i];
    if (b != 0) {
      out.push_back(b);
      ++code;
    }
    // A full run at the very end closes the encoding without a trailing group.
    if (b == 0 || (code == 0xFF && i + 1 < payload.size())) {
      out[code_at] = code;
      code_at = out.size();
      out.push_back(0);
      code = 1;
    }
  }
  out[code_at] = code;
  return out;
}

std::optional<Bytes> cobs_decode(ByteView encoded) {
  if (encoded.empty()) return std::nullopt;
  Bytes out;
  out.reserve(encoded.size());
  std::size_t i = 0;
  while (i < encoded.size()) {
    const std::uint8_t code = encoded[i++];
    if (code == 0) return std::nullopt;
    const std::size_t run = code - 1u;
    if (i + run > encoded.size()) return std::nullopt;
    for (std::size_t k = 0; k < run; ++k) {
      if (encoded[i + k] == 0) return std::nullopt;
      out.push_back(encoded[i + k]);
    }
    i += run;
    if (code != 0xFF && i < encoded.size()) out.push_back(0);
  }
  return out;
}

Bytes frame(ByteView datagram, std::size_t max_datagram) {
  if (datagram.empty()) throw Error(ErrorCode::InvalidArgument, "empty datagram");
  if (datagram.size() > max_datagram)
    throw Error(ErrorCode::Oversize, "datagram of " + std::to_string(datagram.size()) +
                                         " bytes exceeds limit " + std::to_string(max_datagram));
  Bytes out;
  out.reserve(cobs_max_encoded_size(datagram.size()) + 2);
  out.push_back(0);
  Bytes enc = cobs_encode(datagram);
  out.insert(out.end(), enc.begin(), enc.end());
  out.push_back(0);
  return out;
}

std::uint64_t fixed_frame_boundary(std::uint64_t f, std::uint64_t s) {
  if (f == 0) throw Error(ErrorCode::InvalidArgument, "frame size must be positive");
  // (s - 1) mod f with a non-negative result; s == 0 wraps to f - 1.
  const std::uint64_t m = s == 0 ? f - 1 : (s - 1) % f;
  return f - m - 1;
}

}  // namespace minion::ucobs
