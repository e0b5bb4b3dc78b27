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

#include "crypto.hpp"

#include <openssl/core_names.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>

#include <utility>

namespace minion::crypto {

namespace {
[[noreturn]] void fail(const char* what) { throw Error(ErrorCode::Crypto, what); }
}  // namespace

Aes128Cbc::Aes128Cbc(ByteView key) {
  if (key.size() != 16) throw Error(ErrorCode::InvalidArgument, "AES-128 key must be 16 bytes");
  enc_ = EVP_CIPHER_CTX_new();
  dec_ = EVP_CIPHER_CTX_new();
  if (!enc_ || !dec_) fail("cipher context allocation");
  if (EVP_EncryptInit_ex(enc_, EVP_aes_128_cbc(), nullptr, key.data(), nullptr) != 1 ||
      EVP_DecryptInit_ex(dec_, EVP_aes_128_cbc(), nullptr, key.data(), nullptr) != 1)
    fail("cipher init");
  EVP_CIPHER_CTX_set_padding(enc_, 0);
  EVP_CIPHER_CTX_set_padding(dec_, 0);
}

Aes128Cbc::~Aes128Cbc() {
  EVP_CIPHER_CTX_free(enc_);
  EVP_CIPHER_CTX_free(dec_);
}

Aes128Cbc::Aes128Cbc(Aes128Cbc&& o) noexcept
    : enc_(std::exchange(o.enc_, nullptr)), dec_(std::exchange(o.dec_, nullptr)) {}

Aes128Cbc& Aes128Cbc::operator=(Aes128Cbc&& o) noexcept {
  std::swap(enc_, o.enc_);
  std::swap(dec_, o.dec_);
  return *this;
}

void Aes128Cbc::encrypt(ByteView iv, ByteView in, std::uint8_t* out) { run(true, iv, in, out); }
void Aes128Cbc::decrypt(ByteView iv, ByteView in, std::uint8_t* out) { run(false, iv, in, out); }

void Aes128Cbc::run(bool enc, ByteView iv, ByteView in, std::uint8_t* out) {
  if (iv.size() != 16 || in.size() % 16 != 0)
    throw Error(ErrorCode::InvalidArgument, "CBC needs a 16-byte IV and whole blocks");
  auto* ctx = enc ? enc_ : dec_;
  // Re-initialise with the IV only; the key schedule is kept.
  if (EVP_CipherInit_ex(ctx, nullptr, nullptr, nullptr, iv.data(), enc ? 1 : 0) != 1)
    fail("cipher iv");
  int n = 0;
  if (!in.empty() && EVP_CipherUpdate(ctx, out, &n, in.data(), static_cast<int>(in.size())) != 1)
    fail("cipher update");
  int tail = 0;
  if (EVP_CipherFinal_ex(ctx, out + n, &tail) != 1) fail("cipher final");
}

HmacSha256::HmacSha256(ByteView key) {
  EVP_MAC* mac = EVP_MAC_fetch(nullptr, "HMAC", nullptr);
  if (!mac) fail("HMAC unavailable");
  keyed_ = EVP_MAC_CTX_new(mac);
  EVP_MAC_free(mac);
  if (!keyed_) fail("MAC context allocation");
  char digest[] = "SHA256";
  OSSL_PARAM params[] = {
      OSSL_PARAM_construct_utf8_string(OSSL_MAC_PARAM_DIGEST, digest, 0),
      OSSL_PARAM_construct_end(),
  };
  if (EVP_MAC_init(keyed_, key.data(), key.size(), params) != 1) fail("MAC init");
}

HmacSha256::~HmacSha256() { EVP_MAC_CTX_free(keyed_); }

HmacSha256::HmacSha256(HmacSha256&& o) noexcept : keyed_(std::exchange(o.keyed_, nullptr)) {}

HmacSha256& HmacSha256::operator=(HmacSha256&& o) noexcept {
  std::swap(keyed_, o.keyed_);
  return *this;
}

void HmacSha256::compute(ByteView a, ByteView b, std::uint8_t* out) {
  EVP_MAC_CTX* ctx = EVP_MAC_CTX_dup(keyed_);
  if (!ctx) fail("MAC context copy");
  std::size_t len = 0;
  bool ok = EVP_MAC_update(ctx, a.data(), a.size()) == 1 &&
            EVP_MAC_update(ctx, b.data(), b.size()) == 1 &&
            EVP_MAC_final(ctx, out, &len, kSize) == 1 && len == kSize;
  EVP_MAC_CTX_free(ctx);
  if (!ok) fail("MAC compute");
}

bool equal(ByteView a, ByteView b) {
  return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

}  // namespace minion::crypto
