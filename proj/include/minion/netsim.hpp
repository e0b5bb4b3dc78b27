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

// Deterministic discrete-event network: two unidirectional links between a
// server side and a client side, shared by any number of flows.

#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "minion/common.hpp"

namespace minion::netsim {

enum class Side : std::uint8_t { Server = 0, Client = 1 };
enum class Direction : std::uint8_t { Down = 0, Up = 1 };  // Down: server -> client

inline Side peer(Side s) { return s == Side::Server ? Side::Client : Side::Server; }
inline Direction direction_from(Side sender) {
  return sender == Side::Server ? Direction::Down : Direction::Up;
}
const char* to_string(Side s);

// Half-open range [left, right) in wire sequence space.
struct SackBlock {
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  bool operator==(const SackBlock&) const = default;
};

namespace seg_flags {
inline constexpr std::uint8_t kAck = 0x01;
inline constexpr std::uint8_t kRetransmit = 0x02;  // sender-side annotation for traces
}  // namespace seg_flags

struct Segment {
  std::uint32_t flow = 0;
  Side from = Side::Server;
  std::uint32_t seq = 0;
  std::uint32_t ack = 0;
  std::uint32_t window = 0;
  std::uint8_t flags = 0;
  std::vector<SackBlock> sack;  // at most 3
  Bytes payload;

  std::size_t size() const { return payload.size(); }
};

inline constexpr std::size_t kMaxSegmentBytes = 64 * 1024;

struct ResegmenterConfig {
  std::size_t mtu = 1500;
  bool coalesce = true;
  // How long a partial run may wait for more in-order bytes. Zero flushes at
  // the end of the current instant.
  TimeUs hold_us = 0;
};

struct SimConfig {
  std::uint64_t seed = 1;
  TimeUs rtt_us = 60 * kMillisecond;
  double bandwidth_down_bps = 10e6;
  double bandwidth_up_bps = 10e6;
  double loss_rate = 0.0;
  std::optional<ResegmenterConfig> middlebox;
  // Transmission indices (0-based, per direction) that are always dropped.
  // Lets tests script exact loss patterns on top of the random model.
  std::set<std::uint64_t> scripted_drops_down;
  std::set<std::uint64_t> scripted_drops_up;

  void validate() const;
};

// Applies one `key=value` setting; throws Error(Config) on unknown keys or
// unparsable values.
void apply_setting(SimConfig& config, std::string_view key, std::string_view value);
SimConfig parse_config(std::string_view key_value_text);

enum class TraceKind : std::uint8_t { Send, Drop, Arrive, Timeout };
const char* to_string(TraceKind k);

struct TraceEvent {
  TimeUs time = 0;
  TraceKind kind = TraceKind::Send;
  Side endpoint = Side::Server;
  std::uint32_t flow = 0;
  std::uint32_t seq = 0;
  std::uint32_t len = 0;
  std::uint8_t flags = 0;
  std::uint32_t ack = 0;
  std::uint32_t window = 0;
  std::vector<SackBlock> sack;

  bool operator==(const TraceEvent&) const = default;
};

class EventTrace {
 public:
  void set_enabled(bool on) { enabled_ = on; }
  bool enabled() const { return enabled_; }
  void record(TimeUs now, TraceKind kind, const Segment& seg, Side endpoint);
  void record_timeout(TimeUs now, Side endpoint, std::uint32_t flow, std::uint32_t seq);

  const std::vector<TraceEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }

  // time_us,kind,endpoint,seq,len,flags
  void write_csv(std::ostream& out) const;
  std::string to_csv() const;

 private:
  bool enabled_ = true;
  std::vector<TraceEvent> events_;
};

// Single-threaded event loop. Events run in time order; ties run in the order
// they were scheduled.
class Simulator {
 public:
  using Action = std::function<void()>;

  TimeUs now() const { return now_; }
  void at(TimeUs when, Action action);
  void after(TimeUs delay, Action action) { at(now_ + delay, std::move(action)); }

  // Runs every event with time <= until. Returns the number executed.
  std::size_t run(TimeUs until);
  bool idle() const { return queue_.empty(); }
  std::optional<TimeUs> next_event_time() const;

  EventTrace& trace() { return trace_; }
  const EventTrace& trace() const { return trace_; }

 private:
  struct Entry {
    TimeUs time;
    std::uint64_t order;
    Action action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.time != b.time ? a.time > b.time : a.order > b.order;
    }
  };

  TimeUs now_ = 0;
  std::uint64_t next_order_ = 0;
  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  EventTrace trace_;
};

class SegmentSink {
 public:
  virtual ~SegmentSink() = default;
  virtual void deliver(Segment segment) = 0;
};

class SegmentOutlet {
 public:
  virtual ~SegmentOutlet() = default;
  virtual void send(Segment segment) = 0;
};

TimeUs serialization_delay(std::size_t bytes, double bandwidth_bps);

// Concatenates an in-order run of segments and re-splits the payload into
// segments of at most `mtu` bytes. Header fields other than seq come from
// the last segment of the run.
std::vector<Segment> resegment(std::span<const Segment> run, std::size_t mtu);

// Store-and-forward middlebox stage in front of a link.
class Resegmenter {
 public:
  explicit Resegmenter(ResegmenterConfig config) : config_(config) {}

  // Returns the segments to forward now. `needs_flush` is set when bytes are
  // held back and flush() must be called later.
  std::vector<Segment> accept(Segment segment, bool& needs_flush);
  std::vector<Segment> flush();
  bool holding() const { return !held_.empty(); }
  const ResegmenterConfig& config() const { return config_; }

 private:
  ResegmenterConfig config_;
  std::vector<Segment> held_;
  std::size_t held_bytes_ = 0;
  std::map<std::uint32_t, std::uint32_t> next_seq_;  // per flow
};

struct LinkStats {
  std::uint64_t transmissions = 0;
  std::uint64_t drops = 0;
  std::uint64_t bytes = 0;
};

class Link {
 public:
  Link(Simulator& sim, Direction dir, double bandwidth_bps, TimeUs propagation_us,
       double loss_rate, std::uint64_t seed, std::set<std::uint64_t> scripted_drops,
       std::optional<ResegmenterConfig> middlebox);

  // Decides the fate of one transmission of `bytes` starting no earlier than
  // `now`: nullopt if dropped, otherwise the arrival time. Advances the FIFO.
  std::optional<TimeUs> admit(std::size_t bytes, TimeUs now);

  // Passes the segment through the middlebox (if any) and onto the wire.
  void transmit(Segment segment);

  void set_receiver(std::function<void(Segment)> receiver) { receiver_ = std::move(receiver); }
  const LinkStats& stats() const { return stats_; }
  Direction direction() const { return dir_; }

 private:
  void put_on_wire(Segment segment);

  Simulator& sim_;
  Direction dir_;
  double bandwidth_bps_;
  TimeUs propagation_us_;
  double loss_rate_;
  SplitMix64 rng_;
  std::set<std::uint64_t> scripted_drops_;
  std::optional<Resegmenter> middlebox_;
  bool flush_scheduled_ = false;
  TimeUs busy_until_ = 0;
  LinkStats stats_;
  std::function<void(Segment)> receiver_;
};

class Network : public SegmentOutlet {
 public:
  Network(Simulator& sim, const SimConfig& config);

  // Registers the endpoint receiving segments addressed to (flow, side).
  void attach(std::uint32_t flow, Side side, SegmentSink& sink);
  bool attached(std::uint32_t flow, Side side) const;

  void send(Segment segment) override;

  Simulator& sim() { return sim_; }
  Link& link(Direction d) { return d == Direction::Down ? down_ : up_; }
  const SimConfig& config() const { return config_; }

 private:
  void arrive(Segment segment);

  Simulator& sim_;
  SimConfig config_;
  Link down_;
  Link up_;
  std::map<std::pair<std::uint32_t, Side>, SegmentSink*> sinks_;
};

// Scripted application writes for run().
struct WorkloadAction {
  TimeUs at = 0;
  Side endpoint = Side::Server;
  std::uint32_t flow = 0;
  std::size_t bytes = 0;
  std::uint32_t tag = 0;
  std::uint8_t flags = 0;
};
using WorkloadScript = std::vector<WorkloadAction>;

WorkloadScript parse_workload(std::string_view text);

struct RunOptions {
  bool unordered_recv = false;
  bool unordered_send = false;
};

// Runs one connection (flow 0) between the two sides, applying the workload
// writes, until `until`. Returns the full event trace.
EventTrace run(const SimConfig& config, const WorkloadScript& workload, TimeUs until,
               const RunOptions& options = {});

}  // namespace minion::netsim
