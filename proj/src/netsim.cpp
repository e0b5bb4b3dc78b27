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

#include "minion/netsim.hpp"

#include <cctype>
#include <charconv>
#include <limits>
#include <cmath>
#include <sstream>

namespace minion::netsim {

const char* to_string(Side s) { return s == Side::Server ? "server" : "client"; }

const char* to_string(TraceKind k) {
  switch (k) {
    case TraceKind::Send: return "send";
    case TraceKind::Drop: return "drop";
    case TraceKind::Arrive: return "arrive";
    case TraceKind::Timeout: return "timeout";
  }
  return "?";
}

void SimConfig::validate() const {
  if (!(loss_rate >= 0.0 && loss_rate <= 1.0))
    throw Error(ErrorCode::Config, "loss_rate must be in [0,1]");
  if (!(bandwidth_down_bps > 0.0) || !(bandwidth_up_bps > 0.0))
    throw Error(ErrorCode::Config, "bandwidths must be positive");
  if (rtt_us < 0) throw Error(ErrorCode::Config, "rtt must be non-negative");
  if (middlebox && middlebox->mtu < 64)
    throw Error(ErrorCode::Config, "middlebox mtu must be at least 64");
  if (middlebox && middlebox->hold_us < 0)
    throw Error(ErrorCode::Config, "middlebox hold must be non-negative");
}

namespace {

double parse_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    std::string s(v);
    double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::Config, "bad value for " + std::string(key) + ": " + std::string(v));
  }
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error(ErrorCode::Config, "bad value for " + std::string(key) + ": " + std::string(v));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

void apply_setting(SimConfig& c, std::string_view key, std::string_view value) {
  if (key == "seed") {
    c.seed = parse_u64(key, value);
  } else if (key == "rtt") {
    c.rtt_us = static_cast<TimeUs>(std::llround(parse_double(key, value) * kMillisecond));
  } else if (key == "rtt_us") {
    c.rtt_us = static_cast<TimeUs>(parse_u64(key, value));
  } else if (key == "bw-down" || key == "bandwidth_down") {
    c.bandwidth_down_bps = parse_double(key, value);
  } else if (key == "bw-up" || key == "bandwidth_up") {
    c.bandwidth_up_bps = parse_double(key, value);
  } else if (key == "loss" || key == "loss_rate") {
    c.loss_rate = parse_double(key, value);
  } else if (key == "mtu") {
    if (!c.middlebox) c.middlebox = ResegmenterConfig{};
    c.middlebox->mtu = parse_u64(key, value);
  } else if (key == "coalesce") {
    if (!c.middlebox) c.middlebox = ResegmenterConfig{};
    c.middlebox->coalesce = value == "1" || value == "true" || value == "on";
  } else if (key == "middlebox-hold") {
    if (!c.middlebox) c.middlebox = ResegmenterConfig{};
    c.middlebox->hold_us = static_cast<TimeUs>(std::llround(parse_double(key, value) * kMillisecond));
  } else {
    throw Error(ErrorCode::Config, "unknown setting: " + std::string(key));
  }
}

SimConfig parse_config(std::string_view text) {
  SimConfig c;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::Config, "line " + std::to_string(line_no) + ": expected key=value");
    apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

void EventTrace::record(TimeUs now, TraceKind kind, const Segment& seg, Side endpoint) {
  if (!enabled_) return;
  events_.push_back(TraceEvent{now, kind, endpoint, seg.flow, seg.seq,
                               static_cast<std::uint32_t>(seg.payload.size()), seg.flags,
                               seg.ack, seg.window, seg.sack});
}

void EventTrace::record_timeout(TimeUs now, Side endpoint, std::uint32_t flow, std::uint32_t seq) {
  if (!enabled_) return;
  TraceEvent ev;
  ev.time = now;
  ev.kind = TraceKind::Timeout;
  ev.endpoint = endpoint;
  ev.flow = flow;
  ev.seq = seq;
  events_.push_back(std::move(ev));
}

void EventTrace::write_csv(std::ostream& out) const {
  out << "time_us,kind,endpoint,seq,len,flags\n";
  for (const auto& e : events_) {
    out << e.time << ',' << to_string(e.kind) << ',' << to_string(e.endpoint) << ',' << e.seq
        << ',' << e.len << ',' << static_cast<unsigned>(e.flags) << '\n';
  }
}

std::string EventTrace::to_csv() const {
  std::ostringstream os;
  write_csv(os);
  return os.str();
}

// ---------------------------------------------------------------------------

void Simulator::at(TimeUs when, Action action) {
  if (when < now_) when = now_;
  queue_.push(Entry{when, next_order_++, std::move(action)});
}

std::size_t Simulator::run(TimeUs until) {
  std::size_t n = 0;
  while (!queue_.empty() && queue_.top().time <= until) {
    // priority_queue::top is const; the action is moved out via a copy of
    // the entry before popping.
    Entry e = std::move(const_cast<Entry&>(queue_.top()));
    queue_.pop();
    now_ = e.time;
    e.action();
    ++n;
  }
  if (queue_.empty() || queue_.top().time > until) {
    if (until > now_ && until != std::numeric_limits<TimeUs>::max()) now_ = until;
  }
  return n;
}

std::optional<TimeUs> Simulator::next_event_time() const {
  if (queue_.empty()) return std::nullopt;
  return queue_.top().time;
}

// ---------------------------------------------------------------------------

TimeUs serialization_delay(std::size_t bytes, double bandwidth_bps) {
  return static_cast<TimeUs>(
      std::llround(static_cast<double>(bytes) * 8.0 * 1e6 / bandwidth_bps));
}

std::vector<Segment> resegment(std::span<const Segment> run, std::size_t mtu) {
  if (mtu == 0) throw Error(ErrorCode::InvalidArgument, "mtu must be positive");
  std::vector<Segment> out;
  if (run.empty()) return out;
  Bytes stream;
  for (const auto& s : run) stream.insert(stream.end(), s.payload.begin(), s.payload.end());
  const Segment& last = run.back();
  std::uint32_t seq = run.front().seq;
  for (std::size_t pos = 0; pos < stream.size(); pos += mtu) {
    std::size_t n = std::min(mtu, stream.size() - pos);
    Segment s = last;
    s.seq = seq;
    s.payload.assign(stream.begin() + static_cast<std::ptrdiff_t>(pos),
                     stream.begin() + static_cast<std::ptrdiff_t>(pos + n));
    seq += static_cast<std::uint32_t>(n);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Segment> Resegmenter::accept(Segment segment, bool& needs_flush) {
  std::vector<Segment> out;
  needs_flush = false;
  if (segment.payload.empty()) {
    out.push_back(std::move(segment));
    needs_flush = holding();
    return out;
  }
  if (!config_.coalesce) {
    if (segment.payload.size() <= config_.mtu) {
      out.push_back(std::move(segment));
    } else {
      out = resegment(std::span<const Segment>(&segment, 1), config_.mtu);
    }
    return out;
  }

  auto it = next_seq_.find(segment.flow);
  const bool in_order = it == next_seq_.end() || it->second == segment.seq;
  const bool same_flow = held_.empty() || held_.front().flow == segment.flow;
  if (!in_order || !same_flow) {
    // Only in-order runs are coalesced; anything else goes through as-is.
    out = flush();
    if (in_order) {
      next_seq_[segment.flow] = segment.seq + static_cast<std::uint32_t>(segment.payload.size());
      held_.push_back(std::move(segment));
      held_bytes_ = held_.back().payload.size();
    } else {
      out.push_back(std::move(segment));
    }
  } else {
    next_seq_[segment.flow] = segment.seq + static_cast<std::uint32_t>(segment.payload.size());
    held_bytes_ += segment.payload.size();
    held_.push_back(std::move(segment));
  }

  if (held_bytes_ >= config_.mtu) {
    auto pieces = resegment(held_, config_.mtu);
    held_.clear();
    held_bytes_ = 0;
    for (auto& p : pieces) {
      if (p.payload.size() == config_.mtu) {
        out.push_back(std::move(p));
      } else {
        held_bytes_ = p.payload.size();
        held_.push_back(std::move(p));
      }
    }
  }
  needs_flush = holding();
  return out;
}

std::vector<Segment> Resegmenter::flush() {
  if (held_.empty()) return {};
  auto out = resegment(held_, config_.mtu);
  held_.clear();
  held_bytes_ = 0;
  return out;
}

// ---------------------------------------------------------------------------

Link::Link(Simulator& sim, Direction dir, double bandwidth_bps, TimeUs propagation_us,
           double loss_rate, std::uint64_t seed, std::set<std::uint64_t> scripted_drops,
           std::optional<ResegmenterConfig> middlebox)
    : sim_(sim),
      dir_(dir),
      bandwidth_bps_(bandwidth_bps),
      propagation_us_(propagation_us),
      loss_rate_(loss_rate),
      rng_(seed),
      scripted_drops_(std::move(scripted_drops)) {
  if (middlebox) middlebox_.emplace(*middlebox);
}

std::optional<TimeUs> Link::admit(std::size_t bytes, TimeUs now) {
  const std::uint64_t index = stats_.transmissions++;
  // One draw per transmission, whether or not it is used, keeps the loss
  // pattern keyed to the transmission index.
  const double draw = rng_.uniform();
  if (scripted_drops_.count(index) != 0 || draw < loss_rate_) {
    ++stats_.drops;
    return std::nullopt;
  }
  const TimeUs start = std::max(now, busy_until_);
  busy_until_ = start + serialization_delay(bytes, bandwidth_bps_);
  stats_.bytes += bytes;
  return busy_until_ + propagation_us_;
}

void Link::transmit(Segment segment) {
  if (segment.payload.size() > kMaxSegmentBytes)
    throw Error(ErrorCode::InvalidArgument, "segment larger than 64 KiB");
  if (!middlebox_) {
    put_on_wire(std::move(segment));
    return;
  }
  bool needs_flush = false;
  for (auto& s : middlebox_->accept(std::move(segment), needs_flush)) put_on_wire(std::move(s));
  if (needs_flush && !flush_scheduled_) {
    flush_scheduled_ = true;
    sim_.after(middlebox_->config().hold_us, [this] {
      flush_scheduled_ = false;
      for (auto& s : middlebox_->flush()) put_on_wire(std::move(s));
    });
  }
}

void Link::put_on_wire(Segment segment) {
  const Side from = segment.from;
  auto arrival = admit(segment.payload.size(), sim_.now());
  if (!arrival) {
    sim_.trace().record(sim_.now(), TraceKind::Drop, segment, from);
    return;
  }
  sim_.trace().record(sim_.now(), TraceKind::Send, segment, from);
  sim_.at(*arrival, [this, seg = std::move(segment)]() mutable {
    if (receiver_) receiver_(std::move(seg));
  });
}

// ---------------------------------------------------------------------------

Network::Network(Simulator& sim, const SimConfig& config)
    : sim_(sim),
      config_(config),
      down_(sim, Direction::Down, config.bandwidth_down_bps, config.rtt_us / 2, config.loss_rate,
            derive_seed(config.seed, "link-down"), config.scripted_drops_down, config.middlebox),
      up_(sim, Direction::Up, config.bandwidth_up_bps, config.rtt_us - config.rtt_us / 2,
          config.loss_rate, derive_seed(config.seed, "link-up"), config.scripted_drops_up,
          config.middlebox) {
  config_.validate();
  down_.set_receiver([this](Segment s) { arrive(std::move(s)); });
  up_.set_receiver([this](Segment s) { arrive(std::move(s)); });
}

void Network::attach(std::uint32_t flow, Side side, SegmentSink& sink) {
  sinks_[{flow, side}] = &sink;
}

bool Network::attached(std::uint32_t flow, Side side) const {
  return sinks_.count({flow, side}) != 0;
}

void Network::send(Segment segment) {
  if (!attached(segment.flow, peer(segment.from)))
    throw Error(ErrorCode::Config, "no endpoint for flow " + std::to_string(segment.flow));
  link(direction_from(segment.from)).transmit(std::move(segment));
}

void Network::arrive(Segment segment) {
  const Side to = peer(segment.from);
  sim_.trace().record(sim_.now(), TraceKind::Arrive, segment, to);
  auto it = sinks_.find({segment.flow, to});
  if (it != sinks_.end()) it->second->deliver(std::move(segment));
}

}  // namespace minion::netsim
