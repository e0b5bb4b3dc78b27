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

#include "minion/utls.hpp"

#include <algorithm>
#include <cmath>

#include "crypto.hpp"

namespace minion::utls {

void encode_header(const RecordHeader& h, std::uint8_t* out) {
  out[0] = h.content_type;
  out[1] = h.version_major;
  out[2] = h.version_minor;
  put_be16(out + 3, h.length);
}

RecordHeader decode_header(const std::uint8_t* p) {
  return RecordHeader{p[0], p[1], p[2], get_be16(p + 3)};
}

bool plausible_header(const std::uint8_t* p) {
  return p[0] >= kChangeCipherSpec && p[0] <= kApplicationData && p[1] == 3 && p[2] == 2 &&
         get_be16(p + 3) <= kMaxBody;
}

CipherSuiteState CipherSuiteState::null_cipher() {
  CipherSuiteState s;
  s.mode = CipherMode::NullCipher;
  return s;
}

CipherSuiteState CipherSuiteState::block(Bytes enc_key, Bytes mac_key) {
  CipherSuiteState s;
  s.mode = CipherMode::BlockCipherExplicitIV;
  s.enc_key = std::move(enc_key);
  s.mac_key = std::move(mac_key);
  s.validate();
  return s;
}

void CipherSuiteState::validate() const {
  if (mode == CipherMode::NullCipher) return;
  if (enc_key.size() != kKeySize) throw Error(ErrorCode::Config, "encryption key must be 16 bytes");
  if (mac_key.empty()) throw Error(ErrorCode::Config, "MAC key must not be empty");
}

// ---------------------------------------------------------------------------

RecordCodec::RecordCodec(CipherSuiteState state) : state_(std::move(state)) {
  state_.validate();
  if (state_.mode == CipherMode::BlockCipherExplicitIV) {
    cipher_ = std::make_unique<crypto::Aes128Cbc>(state_.enc_key);
    hmac_ = std::make_unique<crypto::HmacSha256>(state_.mac_key);
  }
}

RecordCodec::~RecordCodec() = default;
RecordCodec::RecordCodec(RecordCodec&&) noexcept = default;
RecordCodec& RecordCodec::operator=(RecordCodec&&) noexcept = default;

void RecordCodec::mac(std::uint64_t rn, std::uint8_t type, ByteView plaintext, std::uint8_t* out) {
  std::uint8_t pseudo[13];
  put_be64(pseudo, rn);
  pseudo[8] = type;
  pseudo[9] = 3;
  pseudo[10] = 2;
  put_be16(pseudo + 11, static_cast<std::uint16_t>(plaintext.size()));
  hmac_->compute(ByteView(pseudo, sizeof pseudo), plaintext, out);
}

Bytes RecordCodec::seal(ByteView plaintext, std::uint64_t record_number, ByteView iv,
                        std::uint8_t type) {
  if (plaintext.size() > kMaxPlaintext)
    throw Error(ErrorCode::Oversize, "record plaintext exceeds 2^14 bytes");
  Bytes out(kHeaderSize);
  if (state_.mode == CipherMode::NullCipher) {
    encode_header({type, 3, 2, static_cast<std::uint16_t>(plaintext.size())}, out.data());
    out.insert(out.end(), plaintext.begin(), plaintext.end());
    return out;
  }
  if (iv.size() != kBlockSize) throw Error(ErrorCode::InvalidArgument, "IV must be 16 bytes");

  Bytes block;
  if (state_.explicit_record_number) {
    block.resize(8);
    put_be64(block.data(), record_number);
  }
  block.insert(block.end(), plaintext.begin(), plaintext.end());
  const std::size_t inner = block.size();
  block.resize(inner + kMacSize);
  mac(record_number, type, ByteView(block.data(), inner), block.data() + inner);
  const std::size_t pad = (kBlockSize - (block.size() + 1) % kBlockSize) % kBlockSize;
  block.insert(block.end(), pad + 1, static_cast<std::uint8_t>(pad));

  const std::size_t body = kBlockSize + block.size();
  encode_header({type, 3, 2, static_cast<std::uint16_t>(body)}, out.data());
  out.insert(out.end(), iv.begin(), iv.end());
  const std::size_t ct_at = out.size();
  out.resize(ct_at + block.size());
  cipher_->encrypt(iv, block, out.data() + ct_at);
  return out;
}

std::optional<Bytes> RecordCodec::decrypt_body(ByteView record) {
  if (record.size() < kHeaderSize) return std::nullopt;
  const auto h = decode_header(record.data());
  if (h.length != record.size() - kHeaderSize) return std::nullopt;
  const ByteView body = record.subspan(kHeaderSize);
  // IV, then at least MAC plus one padding byte rounded up to whole blocks.
  if (body.size() < kBlockSize + 3 * kBlockSize || body.size() % kBlockSize != 0) return std::nullopt;
  const ByteView iv = body.first(kBlockSize);
  const ByteView ct = body.subspan(kBlockSize);
  Bytes plain(ct.size());
  cipher_->decrypt(iv, ct, plain.data());
  const std::size_t pad = plain.back();
  if (pad + 1 + kMacSize > plain.size()) return std::nullopt;
  for (std::size_t i = plain.size() - pad - 1; i < plain.size(); ++i) {
    if (plain[i] != pad) return std::nullopt;
  }
  plain.resize(plain.size() - pad - 1);
  return plain;
}

std::optional<RecordCodec::Opened> RecordCodec::open(ByteView record,
                                                     std::span<const std::uint64_t> numbers) {
  if (record.size() < kHeaderSize || numbers.empty()) return std::nullopt;
  const auto h = decode_header(record.data());
  if (state_.mode == CipherMode::NullCipher) {
    if (h.length != record.size() - kHeaderSize) return std::nullopt;
    return Opened{numbers.front(), h.content_type, Bytes(record.begin() + kHeaderSize, record.end())};
  }
  if (state_.explicit_record_number) {
    auto opened = open_explicit(record);
    if (opened && std::find(numbers.begin(), numbers.end(), opened->record_number) != numbers.end())
      return opened;
    return std::nullopt;
  }
  auto plain = decrypt_body(record);
  if (!plain) return std::nullopt;
  const std::size_t n = plain->size() - kMacSize;
  const ByteView text(plain->data(), n);
  const ByteView tag(plain->data() + n, kMacSize);
  std::uint8_t expect[kMacSize];
  for (std::uint64_t rn : numbers) {
    mac(rn, h.content_type, text, expect);
    if (crypto::equal(tag, ByteView(expect, kMacSize))) {
      plain->resize(n);
      return Opened{rn, h.content_type, std::move(*plain)};
    }
  }
  return std::nullopt;
}

std::optional<RecordCodec::Opened> RecordCodec::open_explicit(ByteView record) {
  if (state_.mode == CipherMode::NullCipher || !state_.explicit_record_number) return std::nullopt;
  auto plain = decrypt_body(record);
  if (!plain || plain->size() < kMacSize + 8) return std::nullopt;
  const std::size_t n = plain->size() - kMacSize;
  const std::uint64_t rn = get_be64(plain->data());
  std::uint8_t expect[kMacSize];
  mac(rn, record[0], ByteView(plain->data(), n), expect);
  if (!crypto::equal(ByteView(plain->data() + n, kMacSize), ByteView(expect, kMacSize)))
    return std::nullopt;
  return Opened{rn, record[0], Bytes(plain->begin() + 8, plain->begin() + static_cast<std::ptrdiff_t>(n))};
}

// ---------------------------------------------------------------------------

Sealer::Sealer(CipherSuiteState state, std::uint64_t iv_seed)
    : codec_(std::move(state)), iv_rng_(iv_seed) {}

Bytes Sealer::seal(ByteView plaintext, std::uint8_t type) {
  std::uint8_t iv[kBlockSize];
  if (codec_.state().mode == CipherMode::BlockCipherExplicitIV) iv_rng_.fill(iv);
  Bytes out = codec_.seal(plaintext, next_, ByteView(iv, kBlockSize), type);
  ++next_;
  return out;
}

std::vector<Candidate> scan_candidates(ByteView fragment, std::uint64_t base,
                                       const std::map<std::uint64_t, std::uint64_t>& excluded) {
  std::vector<Candidate> out;
  for (std::size_t i = 0; i + kHeaderSize <= fragment.size(); ++i) {
    const std::uint64_t pos = base + i;
    auto ex = excluded.upper_bound(pos);
    if (ex != excluded.begin() && pos < std::prev(ex)->second) {
      i = static_cast<std::size_t>(std::prev(ex)->second - base) - 1;
      continue;
    }
    const std::uint8_t* p = fragment.data() + i;
    if (!plausible_header(p)) continue;
    const auto h = decode_header(p);
    if (i + kHeaderSize + h.length > fragment.size()) continue;
    out.push_back(Candidate{pos, h});
  }
  return out;
}

// ---------------------------------------------------------------------------

void RecordNumberPredictor::confirm(std::uint64_t record_number, std::uint64_t offset,
                                    std::size_t encoded_size) {
  if (!anchor_ || record_number > anchor_->first) anchor_ = {record_number, offset};
  total_ += static_cast<double>(encoded_size);
  ++count_;
}

std::vector<std::uint64_t> RecordNumberPredictor::predict(std::uint64_t offset,
                                                          std::uint64_t fallback) const {
  if (!anchor_) return {fallback};
  const auto [n0, s0] = *anchor_;
  const double gap = (static_cast<double>(offset) - static_cast<double>(s0)) / mean_size();
  const std::int64_t m = static_cast<std::int64_t>(n0) + std::llround(gap);
  std::vector<std::uint64_t> out;
  auto keep = [&](std::int64_t v) {
    if (v > static_cast<std::int64_t>(n0)) out.push_back(static_cast<std::uint64_t>(v));
  };
  keep(m);
  for (std::int64_t d = 1; d <= static_cast<std::int64_t>(w_); ++d) {
    keep(m - d);
    keep(m + d);
  }
  return out;
}

// ---------------------------------------------------------------------------

Receiver::Receiver(CipherSuiteState state, ReceiverOptions options)
    : codec_(std::move(state)),
      unordered_(options.unordered && codec_.state().mode == CipherMode::BlockCipherExplicitIV),
      options_(options),
      predictor_(options.half_width) {}

std::vector<ReceivedRecord> Receiver::on_unit(const utcp::DeliveryUnit& unit) {
  return on_bytes(unwrap32(unit.offset, next_offset_), unit.data);
}

std::vector<ReceivedRecord> Receiver::on_bytes(std::uint64_t offset, ByteView data) {
  std::vector<ReceivedRecord> out;
  if (map_.insert(offset, data) == ucobs::InsertResult::Duplicate) return out;
  const std::uint64_t version = predictor_.version();
  drain_in_order(out);
  if (unordered_) {
    const std::uint64_t lo = std::max(offset, next_offset_);
    const std::uint64_t hi = offset + data.size();
    if (lo < hi) scan_new(lo, hi, out);
    if (predictor_.version() != version) retry_rejected(out);
  }
  return out;
}

void Receiver::drain_in_order(std::vector<ReceivedRecord>& out) {
  for (;;) {
    if (map_.cum_point() < next_offset_ + kHeaderSize) break;
    auto frag = map_.fragment_at(next_offset_);
    const ByteView bytes = frag->second.subspan(next_offset_ - frag->first);
    if (!plausible_header(bytes.data()))
      throw Error(ErrorCode::Aborted, "invalid record header at offset " + std::to_string(next_offset_));
    const auto h = decode_header(bytes.data());
    const std::size_t size = kHeaderSize + h.length;
    if (bytes.size() < size) break;

    auto done = confirmed_rn_.find(next_offset_);
    if (done != confirmed_rn_.end()) {
      if (done->second != next_rn_)
        throw Error(ErrorCode::Aborted, "record number mismatch on in-order pass");
      confirmed_rn_.erase(done);
      confirmed_.erase(next_offset_);
    } else {
      auto opened = codec_.open(bytes.first(size), next_rn_);
      if (!opened) throw Error(ErrorCode::Aborted, "record failed verification in order");
      predictor_.confirm(next_rn_, next_offset_, size);
      ++stats_.in_order;
      out.push_back(ReceivedRecord{next_rn_, next_offset_, opened->type, false,
                                   std::move(opened->plaintext)});
    }
    next_offset_ += size;
    ++next_rn_;
    rejected_.erase(rejected_.begin(), rejected_.lower_bound(next_offset_));
    if (next_offset_ - map_.floor() >= 64 * 1024) map_.raise_floor(next_offset_);
  }
}

bool Receiver::try_candidate(std::uint64_t frag_base, ByteView frag, const Candidate& c,
                             std::vector<ReceivedRecord>& out) {
  const std::size_t size = kHeaderSize + c.header.length;
  const ByteView record = frag.subspan(c.offset - frag_base, size);
  ++stats_.candidates_tried;
  std::optional<RecordCodec::Opened> opened;
  if (codec_.state().explicit_record_number) {
    opened = codec_.open_explicit(record);
    if (opened && opened->record_number < next_rn_) opened.reset();
  } else {
    auto numbers = predictor_.predict(c.offset, next_rn_);
    std::erase_if(numbers, [&](std::uint64_t n) { return n < next_rn_; });
    if (!numbers.empty()) opened = codec_.open(record, numbers);
  }
  if (!opened) {
    ++stats_.candidates_rejected;
    auto [it, fresh] = rejected_.try_emplace(c.offset, Rejection{predictor_.version(), 0});
    if (!fresh) it->second.predictor_version = predictor_.version();
    return false;
  }
  rejected_.erase(c.offset);
  confirmed_[c.offset] = c.offset + size;
  confirmed_rn_[c.offset] = opened->record_number;
  predictor_.confirm(opened->record_number, c.offset, size);
  ++stats_.out_of_order;
  out.push_back(ReceivedRecord{opened->record_number, c.offset, opened->type, true,
                               std::move(opened->plaintext)});
  return true;
}

void Receiver::scan_new(std::uint64_t lo, std::uint64_t hi, std::vector<ReceivedRecord>& out) {
  auto frag = map_.fragment_at(lo);
  if (!frag) return;
  const std::uint64_t base = frag->first;
  const ByteView bytes = frag->second;
  const std::uint64_t reach = kHeaderSize + kMaxBody;
  std::uint64_t pos = std::max({base, next_offset_, lo >= reach ? lo - reach + 1 : 0});
  const std::uint64_t frag_end = base + bytes.size();
  for (; pos < hi && pos + kHeaderSize <= frag_end; ++pos) {
    auto ex = confirmed_.upper_bound(pos);
    if (ex != confirmed_.begin() && pos < std::prev(ex)->second) {
      pos = std::prev(ex)->second - 1;
      continue;
    }
    const std::uint8_t* p = bytes.data() + (pos - base);
    if (!plausible_header(p)) continue;
    const Candidate c{pos, decode_header(p)};
    const std::uint64_t end = pos + kHeaderSize + c.header.length;
    // Records wholly before the new bytes were already tried.
    if (end > frag_end || end <= lo) continue;
    if (try_candidate(base, bytes, c, out)) pos = end - 1;
  }
}

void Receiver::retry_rejected(std::vector<ReceivedRecord>& out) {
  for (auto it = rejected_.begin(); it != rejected_.end();) {
    const std::uint64_t pos = it->first;
    auto& r = it->second;
    ++it;
    if (r.retries >= options_.max_retries || r.predictor_version == predictor_.version()) continue;
    auto frag = map_.fragment_at(pos);
    if (!frag) continue;
    const ByteView bytes = frag->second;
    const std::uint8_t* p = bytes.data() + (pos - frag->first);
    const Candidate c{pos, decode_header(p)};
    if (pos + kHeaderSize + c.header.length > frag->first + bytes.size()) continue;
    auto ex = confirmed_.upper_bound(pos);
    if (ex != confirmed_.begin() && pos < std::prev(ex)->second) continue;
    ++r.retries;
    ++stats_.retries;
    try_candidate(frag->first, bytes, c, out);
  }
}

// ---------------------------------------------------------------------------

OrderedOpener::OrderedOpener(CipherSuiteState state)
    : receiver_(std::move(state), ReceiverOptions{false, 3, 0}) {}

std::vector<Bytes> OrderedOpener::feed(ByteView bytes) {
  std::vector<Bytes> out;
  for (auto& r : receiver_.on_bytes(fed_, bytes)) out.push_back(std::move(r.plaintext));
  fed_ += bytes.size();
  return out;
}

utcp::WriteId send(utcp::Host& host, Sealer& sealer, ByteView plaintext) {
  return host.write(sealer.seal(plaintext));
}

}  // namespace minion::utls
