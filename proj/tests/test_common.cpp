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

#include <set>

#include "doctest.h"
#include "minion/common.hpp"

using namespace minion;

TEST_CASE("splitmix64 matches the published reference outputs") {
  SplitMix64 zero(0);
  CHECK(zero.next() == 0xe220a8397b1dcdafULL);
  CHECK(zero.next() == 0x6e789e6aa1b965f4ULL);
  CHECK(zero.next() == 0x06c45d188009454fULL);
  SplitMix64 r(1234567);
  CHECK(r.next() == 0x599ed017fb08fc85ULL);
  CHECK(r.next() == 0x2c73f08458540fa5ULL);
  CHECK(r.next() == 0x883ebce5a3f27c77ULL);
}

TEST_CASE("uniform stays in [0,1) and below respects its bound") {
  SplitMix64 r(7);
  double sum = 0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
  for (int i = 0; i < 1000; ++i) CHECK(r.below(17) < 17);
}

TEST_CASE("fill covers partial words") {
  SplitMix64 a(3), b(3);
  Bytes x(13);
  a.fill(x);
  const std::uint64_t w0 = b.next(), w1 = b.next();
  for (int i = 0; i < 8; ++i) CHECK(x[i] == static_cast<std::uint8_t>(w0 >> (8 * i)));
  for (int i = 0; i < 5; ++i) CHECK(x[8 + i] == static_cast<std::uint8_t>(w1 >> (8 * i)));
}

TEST_CASE("derive_seed separates purposes") {
  std::set<std::uint64_t> seen;
  for (const char* p : {"link-down", "link-up", "iv", "pages", ""}) seen.insert(derive_seed(1, p));
  CHECK(seen.size() == 5);
  CHECK(derive_seed(1, "x") == derive_seed(1, "x"));
  CHECK(derive_seed(1, "x") != derive_seed(2, "x"));
}

TEST_CASE("serial number comparison wraps") {
  CHECK(seq_lt(1, 2));
  CHECK_FALSE(seq_lt(2, 1));
  CHECK(seq_lt(0xfffffff0u, 5));
  CHECK(seq_le(7, 7));
  CHECK_FALSE(seq_lt(7, 7));
}

TEST_CASE("unwrap32 picks the value nearest the reference") {
  CHECK(unwrap32(5, 0) == 5);
  CHECK(unwrap32(10, (1ULL << 32) + 3) == (1ULL << 32) + 10);
  CHECK(unwrap32(0xfffffffeu, (1ULL << 32) + 3) == 0xfffffffeULL);
  CHECK(unwrap32(0xfffffffeu, 1) == 0xfffffffeULL);
}

TEST_CASE("hex round trip and errors") {
  const Bytes b{0x00, 0x7f, 0xab, 0xff};
  CHECK(to_hex(b) == "007fabff");
  CHECK(from_hex("007FABff") == b);
  CHECK_THROWS_AS(from_hex("abc"), Error);
  CHECK_THROWS_AS(from_hex("zz"), Error);
}

TEST_CASE("big-endian helpers") {
  std::uint8_t buf[8];
  put_be16(buf, 0x1234);
  CHECK(buf[0] == 0x12);
  CHECK(get_be16(buf) == 0x1234);
  put_be32(buf, 0xdeadbeef);
  CHECK(buf[0] == 0xde);
  CHECK(buf[3] == 0xef);
  CHECK(get_be32(buf) == 0xdeadbeef);
  put_be64(buf, 0x0102030405060708ULL);
  CHECK(buf[0] == 1);
  CHECK(buf[7] == 8);
  CHECK(get_be64(buf) == 0x0102030405060708ULL);
}

TEST_CASE("error codes carry through") {
  try {
    throw Error(ErrorCode::Oversize, "big");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Oversize);
    CHECK(std::string(e.what()) == "big");
  }
  CHECK(std::string(to_string(ErrorCode::Io)) == "i/o error");
}
