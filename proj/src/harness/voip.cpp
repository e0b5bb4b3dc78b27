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

#include <algorithm>

#include "internal.hpp"
#include "minion/ucobs.hpp"
#include "minion/utls.hpp"

namespace minion::harness {

namespace {

// Receiving end of the raw datagram baseline.
class DatagramSink : public netsim::SegmentSink {
 public:
  explicit DatagramSink(std::function<void(const Bytes&)> on_datagram) : cb_(std::move(on_datagram)) {}
  void deliver(netsim::Segment segment) override { cb_(segment.payload); }

 private:
  std::function<void(const Bytes&)> cb_;
};

}  // namespace

// Constant-rate voice frames downstream, sharing the bottleneck with
// `competing` bulk downloads that all start at time zero. A frame counts as
// missed when it is not handed up by its playout deadline.
RunResult run_voip(const ExperimentSpec& spec) {
  detail::Path path(spec.sim);
  auto& sim = path.sim;
  const bool udp = spec.mode == "udp";
  const bool secure = !spec.secure.empty();

  struct Frame {
    TimeUs sent = 0;
    std::optional<TimeUs> delivered;
  };
  std::vector<Frame> frames(spec.count);
  const TimeUs last_send = spec.count ? static_cast<TimeUs>(spec.count - 1) * spec.interval : 0;
  const TimeUs voice_end = last_send + spec.jitter_buffer;

  auto arrived = [&](std::uint64_t id) {
    auto& f = frames.at(id);
    if (!f.delivered) f.delivered = sim.now();
  };

  for (std::size_t k = 1; k <= spec.competing; ++k) {
    auto flow = path.connect(static_cast<std::uint32_t>(k), false);
    detail::drain_discard(*flow.client);
    sim.at(0, [&sim, host = flow.server, voice_end] {
      detail::keep_busy(*host, 64 * 1024, [&sim, voice_end] { return sim.now() < voice_end; });
    });
  }

  std::unique_ptr<DatagramSink> sink;
  std::optional<utls::Sealer> sealer;
  std::optional<utls::Receiver> opener;
  ucobs::Receiver rx;
  std::uint32_t udp_seq = 1;
  std::function<void(Bytes)> send_frame;

  if (udp) {
    sink = std::make_unique<DatagramSink>([&](const Bytes& d) { arrived(get_be64(d.data())); });
    path.net.attach(0, netsim::Side::Client, *sink);
    send_frame = [&](Bytes payload) {
      netsim::Segment seg;
      seg.flow = 0;
      seg.from = netsim::Side::Server;
      seg.seq = udp_seq;
      udp_seq += static_cast<std::uint32_t>(payload.size());
      seg.payload = std::move(payload);
      path.net.send(std::move(seg));
    };
  } else {
    auto conn = path.connect(0, spec.unordered());
    auto* server = conn.server;
    auto* client = conn.client;
    if (secure) {
      const auto keys = detail::session_keys(spec.sim.seed);
      sealer.emplace(keys, derive_seed(spec.sim.seed, "iv"));
      utls::ReceiverOptions opts;
      opts.unordered = spec.secure == "utls";
      opts.half_width = spec.predict_window;
      opener.emplace(keys, opts);
      send_frame = [&, server](Bytes payload) { utls::send(*server, *sealer, payload); };
    } else {
      send_frame = [server](Bytes payload) { ucobs::send(*server, payload); };
    }
    client->set_on_readable([&, client] {
      while (auto unit = client->connection().read()) {
        if (secure) {
          for (const auto& r : opener->on_unit(*unit)) arrived(get_be64(r.plaintext.data()));
        } else {
          for (const auto& d : rx.on_unit(*unit)) arrived(get_be64(d.payload.data()));
        }
      }
    });
  }

  for (std::size_t i = 0; i < spec.count; ++i) {
    frames[i].sent = static_cast<TimeUs>(i) * spec.interval;
    sim.at(frames[i].sent, [&, i] { send_frame(detail::tagged_payload(i, spec.record_size)); });
  }
  // Competing flows stop adding data at voice_end; what they queued drains.
  sim.run(voice_end + 120 * kSecond);

  RunResult out;
  std::vector<bool> missed(frames.size());
  std::vector<double> lat;
  std::size_t timely = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    const bool ok = f.delivered && *f.delivered - f.sent <= spec.jitter_buffer;
    missed[i] = !ok;
    if (ok) ++timely;
    ResultRow row{i, f.sent, f.delivered, i * spec.record_size, spec.mode_label(), ok ? "timely" : "missed", 0.0};
    if (f.delivered) {
      row.value = static_cast<double>(*f.delivered - f.sent);
      lat.push_back(row.value);
    }
    out.rows.push_back(std::move(row));
  }
  const auto bursts = burst_lengths(missed);
  std::vector<double> blen;
  std::size_t le3 = 0;
  for (std::size_t i = 0; i < bursts.size(); ++i) {
    blen.push_back(static_cast<double>(bursts[i]));
    if (bursts[i] <= 3) ++le3;
    out.rows.push_back(ResultRow{i, 0, std::nullopt, 0, spec.mode_label(), "burst", blen.back()});
  }
  const double nf = frames.empty() ? 1.0 : static_cast<double>(frames.size());
  out.summary.push_back(detail::summary(spec, "frames", static_cast<double>(frames.size())));
  out.summary.push_back(detail::summary(spec, "delivered", static_cast<double>(lat.size())));
  out.summary.push_back(detail::summary(spec, "timely_fraction", static_cast<double>(timely) / nf));
  out.summary.push_back(detail::summary(spec, "bursts", static_cast<double>(bursts.size())));
  out.summary.push_back(detail::summary(
      spec, "burst_le3_fraction", bursts.empty() ? 1.0 : static_cast<double>(le3) / static_cast<double>(bursts.size())));
  out.summary.push_back(detail::summary(spec, "burst_p90", percentile(blen, 90)));
  out.summary.push_back(detail::summary(spec, "latency_median_us", median(lat)));
  out.summary.push_back(detail::summary(spec, "latency_p90_us", percentile(lat, 90)));
  return out;
}

}  // namespace minion::harness
