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

// TCP-like reliable byte stream with two optional extensions: unordered
// receive delivery (segments handed up on arrival, tagged with their stream
// offset) and prioritized send-queue insertion. Neither extension changes
// what goes on the wire for a given transmission schedule.

#include <array>
#include <deque>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "minion/common.hpp"
#include "minion/netsim.hpp"

namespace minion::utcp {

using netsim::Segment;

namespace send_flags {
inline constexpr std::uint8_t kSquash = 0x01;
}

namespace delivery_flags {
inline constexpr std::uint8_t kOutOfOrder = 0x01;
}

struct ConnectionConfig {
  std::uint32_t flow = 0;
  netsim::Side side = netsim::Side::Server;
  std::uint32_t isn_local = 1;
  std::uint32_t isn_remote = 1;
  std::size_t mss = 1448;
  std::size_t recv_capacity = 256 * 1024;
  std::size_t initial_cwnd_segments = 3;
  TimeUs rto_initial = 1 * kSecond;
  TimeUs rto_min = 200 * kMillisecond;
  TimeUs rto_max = 60 * kSecond;
  bool unordered_recv = false;
  bool unordered_send = false;
};

using WriteId = std::uint64_t;

struct SendEntry {
  WriteId id = 0;
  std::uint32_t tag = 0;
  std::uint8_t flags = 0;
  Bytes data;
  std::optional<std::uint32_t> seq_assigned;
  std::size_t transmitted_bytes = 0;
};

enum class WriteState { Queued, InFlight, Acked, Squashed };

// What the receive path hands to the application.
struct DeliveryUnit {
  std::uint8_t flags = 0;
  std::uint32_t offset = 0;  // seq - ISN
  Bytes data;

  bool out_of_order() const { return (flags & delivery_flags::kOutOfOrder) != 0; }
  bool operator==(const DeliveryUnit&) const = default;
};

// 5-byte headers of the socket-level API: flags u8 + big-endian u32.
std::array<std::uint8_t, 5> encode_recv_header(const DeliveryUnit& unit);
std::array<std::uint8_t, 5> encode_send_header(std::uint8_t flags, std::uint32_t tag);
struct ShimHeader {
  std::uint8_t flags;
  std::uint32_t value;
};
ShimHeader decode_shim_header(ByteView five_bytes);

enum class CcState { SlowStart, CongestionAvoidance, FastRecovery };

struct CongestionState {
  std::size_t cwnd = 0;
  std::size_t ssthresh = 0;
  TimeUs srtt = 0;
  TimeUs rttvar = 0;
  TimeUs rto = 0;
  std::size_t dupack_count = 0;
  CcState state = CcState::SlowStart;
};

struct ConnectionStats {
  std::uint64_t segments_sent = 0;
  std::uint64_t retransmissions = 0;
  std::uint64_t fast_retransmits = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t invalid_acks = 0;
  std::uint64_t duplicate_segments = 0;
  std::uint64_t units_delivered = 0;
};

struct SegmentResult {
  std::optional<Segment> ack;
  std::vector<DeliveryUnit> delivered;
};

class Connection {
 public:
  explicit Connection(ConnectionConfig config);

  // Mode switches may be turned on at any time and never turned off.
  void enable_unordered_recv() { config_.unordered_recv = true; }
  void enable_unordered_send() { config_.unordered_send = true; }
  bool unordered_recv() const { return config_.unordered_recv; }
  bool unordered_send() const { return config_.unordered_send; }

  // Queues one application write. With unordered send enabled the entry is
  // placed ahead of untransmitted entries of strictly lower priority (larger
  // tag); with kSquash it first discards untransmitted entries of the same
  // tag. Throws on an empty write or a closed connection.
  WriteId write(ByteView data, std::uint8_t flags = 0, std::uint32_t tag = 0);

  // Segments that may go out now: pending retransmissions first, then new
  // data within the congestion and peer windows.
  std::vector<Segment> dequeue_for_transmit(TimeUs now);

  // Handles an arriving segment: its ACK fields feed the sender, its payload
  // the receiver. Data segments always produce an immediate ACK.
  SegmentResult on_segment(const Segment& segment, TimeUs now);

  // Sender half of on_segment.
  void on_ack(const Segment& segment, TimeUs now);

  // Next unit for the application, or nullopt when nothing is pending.
  std::optional<DeliveryUnit> read();
  // A pure ACK reopening the advertised window once reads have freed enough
  // space, or nullopt.
  std::optional<Segment> window_update();
  std::size_t readable_units() const { return ready_.size(); }

  std::optional<TimeUs> timer_deadline() const { return rto_deadline_; }
  // Fires the retransmission timer if its deadline has passed.
  bool on_timer(TimeUs now);

  void close() { closed_ = true; }
  bool closed() const { return closed_; }

  // Sender introspection.
  const std::list<SendEntry>& send_queue() const { return pending_; }
  const CongestionState& congestion() const { return cc_; }
  WriteState write_state(WriteId id) const;
  std::size_t unsent_bytes() const { return unsent_bytes_; }
  std::uint64_t bytes_in_flight() const { return snd_nxt_ - snd_una_; }
  std::uint64_t acked_bytes() const { return snd_una_; }
  std::uint64_t sent_bytes() const { return snd_nxt_; }
  bool all_acked() const { return pending_.empty() && inflight_.empty(); }

  // Receiver introspection.
  std::uint32_t adv_window() const;
  std::uint64_t cum_ack_offset() const { return rcv_nxt_; }
  std::uint32_t cum_ack_seq() const;
  std::size_t ooo_ranges() const;

  const ConnectionConfig& config() const { return config_; }
  const ConnectionStats& stats() const { return stats_; }

 private:
  struct InFlight {
    Bytes data;
    TimeUs first_sent = 0;
    TimeUs last_sent = 0;
    bool retransmitted = false;  // in the current recovery episode
    bool ever_retransmitted = false;
    bool sacked = false;
    bool lost = false;
  };
  struct WriteRecord {
    WriteId id;
    std::optional<std::uint64_t> end_offset;  // set once fully transmitted
    bool squashed = false;
  };

  Segment make_segment(std::uint64_t offset, Bytes payload) const;
  void fill_ack_fields(Segment& seg) const;
  std::size_t pipe() const;
  std::size_t next_segment_size() const;
  Bytes take_new_data(std::size_t n);
  void mark_lost_by_sack();
  void enter_recovery();
  void update_rtt(TimeUs sample);
  void restart_timer(TimeUs now);
  Segment retransmit(std::map<std::uint64_t, InFlight>::iterator it, TimeUs now);
  void grow_cwnd(std::size_t acked);
  void receive_payload(const Segment& seg, SegmentResult& result);
  void emit(DeliveryUnit unit, SegmentResult& result);
  std::vector<netsim::SackBlock> sack_blocks() const;
  std::uint32_t wire_seq_remote(std::uint64_t offset) const {
    return config_.isn_remote + static_cast<std::uint32_t>(offset);
  }

  ConnectionConfig config_;
  bool closed_ = false;

  // Sender.
  WriteId next_write_id_ = 1;
  std::list<SendEntry> pending_;
  std::size_t unsent_bytes_ = 0;
  std::deque<WriteRecord> writes_;
  std::map<std::uint64_t, InFlight> inflight_;  // keyed by stream offset
  std::uint64_t snd_una_ = 0;
  std::uint64_t snd_nxt_ = 0;
  std::uint64_t recover_ = 0;
  std::size_t peer_window_;
  CongestionState cc_;
  bool in_recovery_ = false;
  bool rto_recovery_ = false;
  bool force_retransmit_ = false;
  std::size_t bytes_acked_ca_ = 0;
  bool have_rtt_ = false;
  mutable std::uint64_t adv_edge_ = 0;  // right edge last advertised
  std::optional<TimeUs> rto_deadline_;

  // Receiver.
  std::uint64_t rcv_nxt_ = 0;
  std::uint64_t read_point_ = 0;
  std::map<std::uint64_t, Bytes> ooo_;  // disjoint pieces above rcv_nxt_
  std::optional<std::uint64_t> last_ooo_start_;
  std::deque<DeliveryUnit> ready_;

  ConnectionStats stats_;
};

// Binds a Connection to a simulator and a segment outlet (a network link pair
// or a tunnel): transmits whatever the connection allows after every event and
// keeps the retransmission timer scheduled.
class Host : public netsim::SegmentSink {
 public:
  Host(netsim::Simulator& sim, netsim::SegmentOutlet& outlet, ConnectionConfig config);
  Host(const Host&) = delete;
  Host& operator=(const Host&) = delete;
  ~Host() override;

  Connection& connection() { return conn_; }
  const Connection& connection() const { return conn_; }

  WriteId write(ByteView data, std::uint8_t flags = 0, std::uint32_t tag = 0);
  void pump();
  void deliver(Segment segment) override;

  // Called after units became readable.
  void set_on_readable(std::function<void()> cb) { on_readable_ = std::move(cb); }
  // Called after an ACK was processed (send-queue space may have opened).
  void set_on_acked(std::function<void()> cb) { on_acked_ = std::move(cb); }

 private:
  void arm_timer();

  netsim::Simulator& sim_;
  netsim::SegmentOutlet& outlet_;
  Connection conn_;
  std::optional<TimeUs> scheduled_;
  std::shared_ptr<bool> alive_;
  std::function<void()> on_readable_;
  std::function<void()> on_acked_;
};

}  // namespace minion::utcp
