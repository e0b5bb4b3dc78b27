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

// TLS 1.1 style record layer whose receiver can authenticate records out of
// order. Each record is
//
//   type u8 | 3 | 2 | length u16 | IV[16] | AES-128-CBC(plaintext | MAC[32] | pad)
//
// with MAC = HMAC-SHA256(rn u64 | type | 3 | 2 | plaintext_len u16 | plaintext).
// The receiver scans stream fragments for plausible headers, guesses the
// record number from the offset, and lets the MAC reject wrong guesses.

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "minion/common.hpp"
#include "minion/ucobs.hpp"
#include "minion/utcp.hpp"

namespace minion::crypto {
class Aes128Cbc;
class HmacSha256;
}  // namespace minion::crypto

namespace minion::utls {

inline constexpr std::uint8_t kChangeCipherSpec = 20;
inline constexpr std::uint8_t kAlert = 21;
inline constexpr std::uint8_t kHandshake = 22;
inline constexpr std::uint8_t kApplicationData = 23;
inline constexpr std::size_t kHeaderSize = 5;
inline constexpr std::size_t kMaxPlaintext = 1u << 14;
inline constexpr std::size_t kMaxBody = (1u << 14) + 2048;
inline constexpr std::size_t kBlockSize = 16;
inline constexpr std::size_t kMacSize = 32;
inline constexpr std::size_t kKeySize = 16;

struct RecordHeader {
  std::uint8_t content_type = kApplicationData;
  std::uint8_t version_major = 3;
  std::uint8_t version_minor = 2;
  std::uint16_t length = 0;

  bool operator==(const RecordHeader&) const = default;
};

void encode_header(const RecordHeader& h, std::uint8_t* out);
RecordHeader decode_header(const std::uint8_t* p);
// Known type, version 3.2 and a length within the TLS bound.
bool plausible_header(const std::uint8_t* p);

enum class CipherMode { NullCipher, BlockCipherExplicitIV };

struct CipherSuiteState {
  CipherMode mode = CipherMode::BlockCipherExplicitIV;
  Bytes enc_key;  // 16 bytes
  Bytes mac_key;  // any length, 32 recommended
  // Carry the record number as the first 8 plaintext bytes so the receiver
  // needs no prediction.
  bool explicit_record_number = false;

  static CipherSuiteState null_cipher();
  static CipherSuiteState block(Bytes enc_key, Bytes mac_key);
  void validate() const;
};

// Owns the keyed primitives for one direction.
class RecordCodec {
 public:
  explicit RecordCodec(CipherSuiteState state);
  ~RecordCodec();
  RecordCodec(RecordCodec&&) noexcept;
  RecordCodec& operator=(RecordCodec&&) noexcept;

  const CipherSuiteState& state() const { return state_; }

  Bytes seal(ByteView plaintext, std::uint64_t record_number, ByteView iv,
             std::uint8_t type = kApplicationData);

  struct Opened {
    std::uint64_t record_number = 0;
    std::uint8_t type = 0;
    Bytes plaintext;
  };
  // `record` is header | body. Decrypts once and checks the MAC against each
  // number in turn; nullopt when none verifies or the layout is invalid.
  std::optional<Opened> open(ByteView record, std::span<const std::uint64_t> numbers);
  std::optional<Opened> open(ByteView record, std::uint64_t number) {
    return open(record, std::span<const std::uint64_t>(&number, 1));
  }
  // Explicit-record-number mode: the number comes from inside the record.
  std::optional<Opened> open_explicit(ByteView record);

 private:
  void mac(std::uint64_t rn, std::uint8_t type, ByteView plaintext, std::uint8_t* out);
  std::optional<Bytes> decrypt_body(ByteView record);

  CipherSuiteState state_;
  std::unique_ptr<crypto::Aes128Cbc> cipher_;
  std::unique_ptr<crypto::HmacSha256> hmac_;
};

// Sender side: record numbers count up from zero, IVs come from a seeded
// generator.
class Sealer {
 public:
  Sealer(CipherSuiteState state, std::uint64_t iv_seed);

  Bytes seal(ByteView plaintext, std::uint8_t type = kApplicationData);
  std::uint64_t next_record_number() const { return next_; }
  RecordCodec& codec() { return codec_; }

 private:
  RecordCodec codec_;
  SplitMix64 iv_rng_;
  std::uint64_t next_ = 0;
};

struct Candidate {
  std::uint64_t offset = 0;
  RecordHeader header;
  bool operator==(const Candidate&) const = default;
};

// Positions in `fragment` (which starts at stream offset `base`) holding a
// plausible header whose whole record lies inside the fragment, in offset
// order. Positions inside any `excluded` [start, end) range are skipped.
std::vector<Candidate> scan_candidates(ByteView fragment, std::uint64_t base,
                                       const std::map<std::uint64_t, std::uint64_t>& excluded = {});

class RecordNumberPredictor {
 public:
  explicit RecordNumberPredictor(std::size_t half_width = 3) : w_(half_width) {}

  // Records a verified (number, stream offset, encoded size).
  void confirm(std::uint64_t record_number, std::uint64_t offset, std::size_t encoded_size);

  // Candidates for a record starting at `offset`: m, m-1, m+1, ..., m-W,
  // m+W, keeping only numbers above the last confirmed one. With nothing
  // confirmed yet only `fallback` is offered.
  std::vector<std::uint64_t> predict(std::uint64_t offset, std::uint64_t fallback) const;

  bool has_anchor() const { return anchor_.has_value(); }
  std::uint64_t n0() const { return anchor_ ? anchor_->first : 0; }
  std::uint64_t s0() const { return anchor_ ? anchor_->second : 0; }
  double mean_size() const { return count_ ? total_ / static_cast<double>(count_) : 0.0; }
  std::size_t half_width() const { return w_; }
  // Bumped on every confirmation.
  std::uint64_t version() const { return count_; }

 private:
  std::size_t w_;
  std::optional<std::pair<std::uint64_t, std::uint64_t>> anchor_;  // (n0, s0)
  double total_ = 0;
  std::uint64_t count_ = 0;
};

struct ReceivedRecord {
  std::uint64_t record_number = 0;
  std::uint64_t offset = 0;
  std::uint8_t type = 0;
  bool out_of_order = false;
  Bytes plaintext;
};

struct ReceiverOptions {
  bool unordered = true;
  std::size_t half_width = 3;
  std::size_t max_retries = 2;
};

struct ReceiverStats {
  std::uint64_t in_order = 0;
  std::uint64_t out_of_order = 0;
  std::uint64_t candidates_tried = 0;
  std::uint64_t candidates_rejected = 0;
  std::uint64_t retries = 0;
};

// Consumes DeliveryUnits of a record stream. Records come out once each:
// out of order when a candidate verifies, otherwise in order. A record that
// fails verification in order aborts the connection (Error(Aborted)).
class Receiver {
 public:
  Receiver(CipherSuiteState state, ReceiverOptions options = {});

  std::vector<ReceivedRecord> on_unit(const utcp::DeliveryUnit& unit);
  std::vector<ReceivedRecord> on_bytes(std::uint64_t offset, ByteView data);

  bool unordered_enabled() const { return unordered_; }
  const ReceiverStats& stats() const { return stats_; }
  const RecordNumberPredictor& predictor() const { return predictor_; }
  std::uint64_t next_in_order() const { return next_rn_; }

 private:
  void drain_in_order(std::vector<ReceivedRecord>& out);
  void scan_new(std::uint64_t lo, std::uint64_t hi, std::vector<ReceivedRecord>& out);
  bool try_candidate(std::uint64_t frag_base, ByteView frag, const Candidate& c,
                     std::vector<ReceivedRecord>& out);
  void retry_rejected(std::vector<ReceivedRecord>& out);

  RecordCodec codec_;
  bool unordered_;
  ReceiverOptions options_;
  RecordNumberPredictor predictor_;
  ucobs::FragmentMap map_;
  std::uint64_t next_offset_ = 0;
  std::uint64_t next_rn_ = 0;
  std::map<std::uint64_t, std::uint64_t> confirmed_;  // offset -> end, out of order
  std::map<std::uint64_t, std::uint64_t> confirmed_rn_;  // offset -> record number
  struct Rejection {
    std::uint64_t predictor_version;
    std::size_t retries;
  };
  std::map<std::uint64_t, Rejection> rejected_;
  ReceiverStats stats_;
};

// Plain TLS behaviour over a hole-free byte stream.
class OrderedOpener {
 public:
  explicit OrderedOpener(CipherSuiteState state);
  std::vector<Bytes> feed(ByteView bytes);

 private:
  Receiver receiver_;
  std::uint64_t fed_ = 0;
};

// Seals `plaintext` and writes the record to the connection.
utcp::WriteId send(utcp::Host& host, Sealer& sealer, ByteView plaintext);

}  // namespace minion::utls
