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

// Thin RAII wrappers over OpenSSL EVP for the two primitives the record
// layer needs. Contexts are set up once per key and reused per record.

#include <memory>

#include "minion/common.hpp"

struct evp_cipher_ctx_st;
struct evp_mac_ctx_st;

namespace minion::crypto {

class Aes128Cbc {
 public:
  explicit Aes128Cbc(ByteView key);
  ~Aes128Cbc();
  Aes128Cbc(Aes128Cbc&&) noexcept;
  Aes128Cbc& operator=(Aes128Cbc&&) noexcept;

  // Input length must be a multiple of 16; no padding is added or removed.
  void encrypt(ByteView iv, ByteView in, std::uint8_t* out);
  void decrypt(ByteView iv, ByteView in, std::uint8_t* out);

 private:
  void run(bool enc, ByteView iv, ByteView in, std::uint8_t* out);
  evp_cipher_ctx_st* enc_ = nullptr;
  evp_cipher_ctx_st* dec_ = nullptr;
};

class HmacSha256 {
 public:
  static constexpr std::size_t kSize = 32;
  explicit HmacSha256(ByteView key);
  ~HmacSha256();
  HmacSha256(HmacSha256&&) noexcept;
  HmacSha256& operator=(HmacSha256&&) noexcept;

  // MAC over the concatenation of two parts.
  void compute(ByteView a, ByteView b, std::uint8_t* out);

 private:
  evp_mac_ctx_st* keyed_ = nullptr;
};

// Constant-time comparison.
bool equal(ByteView a, ByteView b);

}  // namespace minion::crypto
