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

#include "minion/utcp.hpp"

#include <algorithm>
#include <limits>

namespace minion::utcp {

std::array<std::uint8_t, 5> encode_recv_header(const DeliveryUnit& unit) {
  std::array<std::uint8_t, 5> out{};
  out[0] = unit.flags;
  put_be32(out.data() + 1, unit.offset);
  return out;
}

std::array<std::uint8_t, 5> encode_send_header(std::uint8_t flags, std::uint32_t tag) {
  std::array<std::uint8_t, 5> out{};
  out[0] = flags;
  put_be32(out.data() + 1, tag);
  return out;
}

ShimHeader decode_shim_header(ByteView five_bytes) {
  if (five_bytes.size() < 5) throw Error(ErrorCode::Malformed, "shim header needs 5 bytes");
  return ShimHeader{five_bytes[0], get_be32(five_bytes.data() + 1)};
}

Connection::Connection(ConnectionConfig config) : config_(config) {
  if (config_.mss == 0) throw Error(ErrorCode::Config, "mss must be positive");
  if (config_.recv_capacity < config_.mss) {
    throw Error(ErrorCode::Config, "receive capacity below one segment");
  }
  peer_window_ = config_.recv_capacity;
  cc_.cwnd = std::max<std::size_t>(1, config_.initial_cwnd_segments) * config_.mss;
  cc_.ssthresh = std::numeric_limits<std::uint32_t>::max();
  cc_.rto = config_.rto_initial;
}

WriteId Connection::write(ByteView data, std::uint8_t flags, std::uint32_t tag) {
  if (closed_) throw Error(ErrorCode::Closed, "write on closed connection");
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "zero-length write");

  SendEntry entry;
  entry.id = next_write_id_++;
  entry.tag = tag;
  entry.flags = flags;
  entry.data.assign(data.begin(), data.end());
  writes_.push_back(WriteRecord{entry.id, std::nullopt, false});

  auto untransmitted = [](const SendEntry& e) {
    return e.transmitted_bytes == 0 && !e.seq_assigned;
  };

  if (!config_.unordered_send) {
    pending_.push_back(std::move(entry));
  } else {
    if (flags & send_flags::kSquash) {
      for (auto it = pending_.begin(); it != pending_.end();) {
        if (it->tag == tag && untransmitted(*it)) {
          unsent_bytes_ -= it->data.size();
          auto rec = std::lower_bound(writes_.begin(), writes_.end(), it->id,
                                      [](const WriteRecord& r, WriteId id) { return r.id < id; });
          if (rec != writes_.end() && rec->id == it->id) rec->squashed = true;
          it = pending_.erase(it);
        } else {
          ++it;
        }
      }
    }
    // Entries that have started transmission sit at the head, so the first
    // match is always behind them.
    auto pos = std::find_if(pending_.begin(), pending_.end(), [&](const SendEntry& e) {
      return e.tag > tag && untransmitted(e);
    });
    pending_.insert(pos, std::move(entry));
  }
  unsent_bytes_ += data.size();
  return next_write_id_ - 1;
}

WriteState Connection::write_state(WriteId id) const {
  if (id == 0 || id >= next_write_id_) throw Error(ErrorCode::InvalidArgument, "unknown write id");
  if (writes_.empty() || id < writes_.front().id) return WriteState::Acked;
  const auto& rec = writes_[id - writes_.front().id];
  if (rec.squashed) return WriteState::Squashed;
  if (rec.end_offset) return *rec.end_offset <= snd_una_ ? WriteState::Acked : WriteState::InFlight;
  if (!pending_.empty() && pending_.front().id == id && pending_.front().transmitted_bytes > 0) {
    return WriteState::InFlight;
  }
  return WriteState::Queued;
}

std::uint32_t Connection::adv_window() const {
  std::uint64_t used = rcv_nxt_ - read_point_;
  if (used >= config_.recv_capacity) return 0;
  return static_cast<std::uint32_t>(
      std::min<std::uint64_t>(config_.recv_capacity - used, std::numeric_limits<std::uint32_t>::max()));
}

std::uint32_t Connection::cum_ack_seq() const { return wire_seq_remote(rcv_nxt_); }

std::size_t Connection::ooo_ranges() const {
  std::size_t n = 0;
  std::uint64_t end = 0;
  for (const auto& [off, data] : ooo_) {
    if (n == 0 || off != end) ++n;
    end = off + data.size();
  }
  return n;
}

std::vector<netsim::SackBlock> Connection::sack_blocks() const {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;
  for (const auto& [off, data] : ooo_) {
    if (!ranges.empty() && ranges.back().second == off) {
      ranges.back().second += data.size();
    } else {
      ranges.emplace_back(off, off + data.size());
    }
  }
  std::vector<netsim::SackBlock> out;
  if (ranges.empty()) return out;
  // First block holds the most recent arrival, the rest follow from the
  // highest range downwards.
  std::size_t first = ranges.size() - 1;
  if (last_ooo_start_) {
    for (std::size_t i = 0; i < ranges.size(); ++i) {
      if (ranges[i].first <= *last_ooo_start_ && *last_ooo_start_ < ranges[i].second) first = i;
    }
  }
  auto block = [&](std::size_t i) {
    return netsim::SackBlock{wire_seq_remote(ranges[i].first), wire_seq_remote(ranges[i].second)};
  };
  out.push_back(block(first));
  for (std::size_t i = ranges.size(); i-- > 0 && out.size() < 3;) {
    if (i != first) out.push_back(block(i));
  }
  return out;
}

void Connection::fill_ack_fields(Segment& seg) const {
  seg.flags |= netsim::seg_flags::kAck;
  seg.ack = wire_seq_remote(rcv_nxt_);
  seg.window = adv_window();
  seg.sack = sack_blocks();
  adv_edge_ = std::max(adv_edge_, rcv_nxt_ + seg.window);
}

Segment Connection::make_segment(std::uint64_t offset, Bytes payload) const {
  Segment seg;
  seg.flow = config_.flow;
  seg.from = config_.side;
  seg.seq = config_.isn_local + static_cast<std::uint32_t>(offset);
  seg.payload = std::move(payload);
  fill_ack_fields(seg);
  return seg;
}

std::size_t Connection::pipe() const {
  std::size_t p = 0;
  for (const auto& [off, f] : inflight_) {
    if (f.sacked) continue;
    if (!f.lost) p += f.data.size();
    if (f.retransmitted) p += f.data.size();
  }
  return p;
}

std::size_t Connection::next_segment_size() const {
  if (pending_.empty()) return 0;
  if (config_.unordered_send) {
    const auto& head = pending_.front();
    return std::min(config_.mss, head.data.size() - head.transmitted_bytes);
  }
  return std::min<std::size_t>(config_.mss, unsent_bytes_);
}

Bytes Connection::take_new_data(std::size_t n) {
  Bytes out;
  out.reserve(n);
  while (out.size() < n && !pending_.empty()) {
    auto& e = pending_.front();
    if (!e.seq_assigned) {
      e.seq_assigned = config_.isn_local + static_cast<std::uint32_t>(snd_nxt_ + out.size());
    }
    std::size_t k = std::min(n - out.size(), e.data.size() - e.transmitted_bytes);
    auto from = e.data.begin() + static_cast<std::ptrdiff_t>(e.transmitted_bytes);
    out.insert(out.end(), from, from + static_cast<std::ptrdiff_t>(k));
    e.transmitted_bytes += k;
    if (e.transmitted_bytes == e.data.size()) {
      auto& rec = writes_[e.id - writes_.front().id];
      rec.end_offset = snd_nxt_ + out.size();
      pending_.pop_front();
    }
  }
  unsent_bytes_ -= out.size();
  return out;
}

Segment Connection::retransmit(std::map<std::uint64_t, InFlight>::iterator it, TimeUs now) {
  it->second.retransmitted = true;
  it->second.ever_retransmitted = true;
  it->second.last_sent = now;
  ++stats_.retransmissions;
  ++stats_.segments_sent;
  Segment seg = make_segment(it->first, it->second.data);
  seg.flags |= netsim::seg_flags::kRetransmit;
  // Resending the oldest segment restarts the clock for it.
  if (!rto_deadline_ || it == inflight_.begin()) rto_deadline_ = now + cc_.rto;
  return seg;
}

std::vector<Segment> Connection::dequeue_for_transmit(TimeUs now) {
  std::vector<Segment> out;
  if (force_retransmit_) {
    force_retransmit_ = false;
    if (!inflight_.empty()) out.push_back(retransmit(inflight_.begin(), now));
  }
  for (;;) {
    const std::size_t p = pipe();
    if (in_recovery_ || rto_recovery_) {
      auto it = std::find_if(inflight_.begin(), inflight_.end(), [](const auto& kv) {
        return kv.second.lost && !kv.second.sacked && !kv.second.retransmitted;
      });
      if (it != inflight_.end()) {
        if (p + it->second.data.size() > cc_.cwnd) break;
        out.push_back(retransmit(it, now));
        continue;
      }
    }
    std::size_t n = next_segment_size();
    if (n == 0) break;
    const std::uint64_t limit = snd_una_ + peer_window_;
    if (snd_nxt_ >= limit) break;
    n = static_cast<std::size_t>(std::min<std::uint64_t>(n, limit - snd_nxt_));
    if (p + n > cc_.cwnd) break;

    const std::uint64_t offset = snd_nxt_;
    Bytes data = take_new_data(n);
    out.push_back(make_segment(offset, data));
    inflight_.emplace(offset, InFlight{std::move(data), now, now});
    snd_nxt_ += n;
    ++stats_.segments_sent;
    if (!rto_deadline_) rto_deadline_ = now + cc_.rto;
  }
  return out;
}

void Connection::update_rtt(TimeUs r) {
  if (!have_rtt_) {
    cc_.srtt = r;
    cc_.rttvar = r / 2;
    have_rtt_ = true;
  } else {
    const TimeUs err = cc_.srtt > r ? cc_.srtt - r : r - cc_.srtt;
    cc_.rttvar = (3 * cc_.rttvar + err) / 4;
    cc_.srtt = (7 * cc_.srtt + r) / 8;
  }
  cc_.rto = std::clamp(cc_.srtt + 4 * cc_.rttvar, config_.rto_min, config_.rto_max);
}

void Connection::restart_timer(TimeUs now) {
  if (inflight_.empty()) {
    rto_deadline_.reset();
  } else {
    rto_deadline_ = now + cc_.rto;
  }
}

void Connection::grow_cwnd(std::size_t acked) {
  if (cc_.cwnd < cc_.ssthresh) {
    cc_.cwnd += std::min(acked, 2 * config_.mss);
  } else {
    bytes_acked_ca_ += acked;
    if (bytes_acked_ca_ >= cc_.cwnd) {
      bytes_acked_ca_ -= cc_.cwnd;
      cc_.cwnd += config_.mss;
    }
  }
}

void Connection::mark_lost_by_sack() {
  std::size_t sacked_bytes = 0;
  std::size_t sacked_segments = 0;
  for (auto it = inflight_.rbegin(); it != inflight_.rend(); ++it) {
    auto& f = it->second;
    if (f.sacked) {
      sacked_bytes += f.data.size();
      ++sacked_segments;
    } else if (sacked_segments >= 3 || sacked_bytes > 2 * config_.mss) {
      f.lost = true;
    }
  }
}

void Connection::enter_recovery() {
  in_recovery_ = true;
  recover_ = snd_nxt_;
  cc_.ssthresh = std::max<std::size_t>(cc_.cwnd / 2, 2 * config_.mss);
  cc_.cwnd = cc_.ssthresh;
  bytes_acked_ca_ = 0;
  for (auto& [off, f] : inflight_) f.retransmitted = false;
  inflight_.begin()->second.lost = true;
  force_retransmit_ = true;
  ++stats_.fast_retransmits;
}

void Connection::on_ack(const Segment& seg, TimeUs now) {
  if (!(seg.flags & netsim::seg_flags::kAck)) return;
  const std::uint64_t ack = unwrap32(seg.ack - config_.isn_local, snd_una_);
  if (ack > snd_nxt_) {
    ++stats_.invalid_acks;
    return;
  }
  if (ack < snd_una_) return;
  const bool window_changed = seg.window != peer_window_;
  peer_window_ = seg.window;

  for (const auto& b : seg.sack) {
    const std::uint64_t lo = unwrap32(b.left - config_.isn_local, snd_una_);
    const std::uint64_t hi = unwrap32(b.right - config_.isn_local, snd_una_);
    for (auto it = inflight_.lower_bound(lo);
         it != inflight_.end() && it->first + it->second.data.size() <= hi; ++it) {
      it->second.sacked = true;
    }
  }

  if (ack > snd_una_) {
    const std::size_t acked = static_cast<std::size_t>(ack - snd_una_);
    const std::uint64_t flight_before = snd_nxt_ - snd_una_;
    std::optional<TimeUs> sample;
    while (!inflight_.empty()) {
      auto it = inflight_.begin();
      const std::uint64_t end = it->first + it->second.data.size();
      if (end <= ack) {
        if (!it->second.ever_retransmitted) sample = now - it->second.first_sent;
        inflight_.erase(it);
      } else {
        if (it->first < ack) {
          // A middlebox split the segment; keep the unacknowledged tail.
          auto node = inflight_.extract(it);
          auto& d = node.mapped().data;
          d.erase(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(ack - node.key()));
          node.key() = ack;
          inflight_.insert(std::move(node));
        }
        break;
      }
    }
    snd_una_ = ack;
    if (sample) update_rtt(*sample);
    cc_.dupack_count = 0;

    if (in_recovery_) {
      if (ack >= recover_) {
        in_recovery_ = false;
        cc_.cwnd = cc_.ssthresh;
        for (auto& [off, f] : inflight_) f.retransmitted = false;
      } else if (!inflight_.empty() && !inflight_.begin()->second.retransmitted) {
        inflight_.begin()->second.lost = true;
      }
    } else {
      // Growth only while the window is actually in use.
      if (cc_.cwnd < 2 * flight_before) grow_cwnd(acked);
      if (rto_recovery_ && ack >= recover_) {
        rto_recovery_ = false;
        for (auto& [off, f] : inflight_) f.retransmitted = false;
      }
    }
    restart_timer(now);
    while (!writes_.empty() && writes_.size() > 1) {
      const auto& front = writes_.front();
      if (front.squashed || (front.end_offset && *front.end_offset <= snd_una_)) {
        writes_.pop_front();
      } else {
        break;
      }
    }
  } else if (seg.payload.empty() && !window_changed && !inflight_.empty()) {
    ++cc_.dupack_count;
  }

  mark_lost_by_sack();
  // Duplicate ACKs for data sent before the last recovery point do not start
  // a new episode; they are echoes of that episode's retransmissions.
  if (!in_recovery_ && !rto_recovery_ && !inflight_.empty() && snd_una_ >= recover_ &&
      (cc_.dupack_count >= 3 || inflight_.begin()->second.lost)) {
    enter_recovery();
  }

  if (in_recovery_) {
    cc_.state = CcState::FastRecovery;
  } else {
    cc_.state = cc_.cwnd < cc_.ssthresh ? CcState::SlowStart : CcState::CongestionAvoidance;
  }
}

bool Connection::on_timer(TimeUs now) {
  if (!rto_deadline_ || now < *rto_deadline_) return false;
  if (inflight_.empty()) {
    rto_deadline_.reset();
    return false;
  }
  ++stats_.timeouts;
  cc_.ssthresh = std::max<std::size_t>(cc_.cwnd / 2, 2 * config_.mss);
  cc_.cwnd = config_.mss;
  cc_.dupack_count = 0;
  cc_.state = CcState::SlowStart;
  bytes_acked_ca_ = 0;
  in_recovery_ = false;
  force_retransmit_ = false;
  rto_recovery_ = true;
  recover_ = snd_nxt_;
  for (auto& [off, f] : inflight_) {
    if (!f.sacked) f.lost = true;
    f.retransmitted = false;
  }
  cc_.rto = std::min(cc_.rto * 2, config_.rto_max);
  rto_deadline_ = now + cc_.rto;
  return true;
}

void Connection::emit(DeliveryUnit unit, SegmentResult& result) {
  ++stats_.units_delivered;
  result.delivered.push_back(unit);
  ready_.push_back(std::move(unit));
}

void Connection::receive_payload(const Segment& seg, SegmentResult& result) {
  const std::uint64_t start = unwrap32(seg.seq - config_.isn_remote, rcv_nxt_);
  const std::uint64_t end = start + seg.payload.size();
  const std::uint64_t right_edge = read_point_ + config_.recv_capacity;
  if (end <= rcv_nxt_) {
    ++stats_.duplicate_segments;
    return;
  }
  const std::uint64_t s = std::max(start, rcv_nxt_);
  const std::uint64_t e = std::min(end, right_edge);
  if (s >= e) return;
  const auto* base = seg.payload.data() + (s - start);
  const auto off32 = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };

  if (s == rcv_nxt_) {
    emit(DeliveryUnit{0, off32(s), Bytes(base, base + (e - s))}, result);
    rcv_nxt_ = e;
    while (!ooo_.empty() && ooo_.begin()->first <= rcv_nxt_) {
      auto node = ooo_.extract(ooo_.begin());
      const std::uint64_t os = node.key();
      const Bytes& ob = node.mapped();
      const std::uint64_t oe = os + ob.size();
      if (oe > rcv_nxt_) {
        emit(DeliveryUnit{0, off32(rcv_nxt_),
                          Bytes(ob.begin() + static_cast<std::ptrdiff_t>(rcv_nxt_ - os), ob.end())},
             result);
        rcv_nxt_ = oe;
      }
    }
    if (last_ooo_start_ && *last_ooo_start_ < rcv_nxt_) last_ooo_start_.reset();
    return;
  }

  // Out of order: store only bytes not already held.
  bool fresh = false;
  std::uint64_t cur = s;
  auto it = ooo_.upper_bound(s);
  if (it != ooo_.begin()) {
    auto prev = std::prev(it);
    cur = std::max(cur, prev->first + prev->second.size());
  }
  while (cur < e) {
    const std::uint64_t gap_end = (it != ooo_.end()) ? std::min(e, it->first) : e;
    if (cur < gap_end) {
      ooo_.emplace_hint(it, cur, Bytes(base + (cur - s), base + (gap_end - s)));
      fresh = true;
    }
    if (it == ooo_.end() || it->first >= e) break;
    cur = std::max(gap_end, it->first + it->second.size());
    ++it;
  }
  if (!fresh) {
    ++stats_.duplicate_segments;
    return;
  }
  last_ooo_start_ = s;
  if (config_.unordered_recv) {
    emit(DeliveryUnit{delivery_flags::kOutOfOrder, off32(s), Bytes(base, base + (e - s))}, result);
  }
}

SegmentResult Connection::on_segment(const Segment& segment, TimeUs now) {
  SegmentResult result;
  on_ack(segment, now);
  if (!segment.payload.empty()) {
    receive_payload(segment, result);
    Segment ack;
    ack.flow = config_.flow;
    ack.from = config_.side;
    ack.seq = config_.isn_local + static_cast<std::uint32_t>(snd_nxt_);
    fill_ack_fields(ack);
    result.ack = std::move(ack);
  }
  return result;
}

std::optional<DeliveryUnit> Connection::read() {
  if (ready_.empty()) return std::nullopt;
  DeliveryUnit unit = std::move(ready_.front());
  ready_.pop_front();
  if (!unit.out_of_order()) {
    read_point_ = std::max(read_point_, unwrap32(unit.offset, read_point_) + unit.data.size());
  }
  return unit;
}

std::optional<Segment> Connection::window_update() {
  const std::uint64_t advertised = adv_edge_ > rcv_nxt_ ? adv_edge_ - rcv_nxt_ : 0;
  const std::uint64_t now_open = adv_window();
  if (2 * advertised > config_.recv_capacity || now_open < 2 * advertised ||
      now_open - advertised < config_.mss) {
    return std::nullopt;
  }
  Segment seg;
  seg.flow = config_.flow;
  seg.from = config_.side;
  seg.seq = config_.isn_local + static_cast<std::uint32_t>(snd_nxt_);
  fill_ack_fields(seg);
  return seg;
}

}  // namespace minion::utcp
