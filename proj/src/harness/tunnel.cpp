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

#include <map>

#include "internal.hpp"
#include "minion/ucobs.hpp"

namespace minion::harness {

namespace {

constexpr std::size_t kInnerMss = 1360;
constexpr std::size_t kInnerWindow = 64 * 1024;

// flow u32 | from u8 | seq u32 | ack u32 | window u32 | flags u8 | nsack u8 |
// nsack * (left u32 | right u32) | payload
Bytes encode_inner(const netsim::Segment& s) {
  Bytes b(19 + 8 * s.sack.size() + s.payload.size());
  std::uint8_t* p = b.data();
  put_be32(p, s.flow);
  p[4] = static_cast<std::uint8_t>(s.from);
  put_be32(p + 5, s.seq);
  put_be32(p + 9, s.ack);
  put_be32(p + 13, s.window);
  p[17] = s.flags;
  p[18] = static_cast<std::uint8_t>(s.sack.size());
  p += 19;
  for (const auto& blk : s.sack) {
    put_be32(p, blk.left);
    put_be32(p + 4, blk.right);
    p += 8;
  }
  std::copy(s.payload.begin(), s.payload.end(), p);
  return b;
}

std::optional<netsim::Segment> decode_inner(ByteView b) {
  if (b.size() < 19) return std::nullopt;
  netsim::Segment s;
  s.flow = get_be32(b.data());
  if (b[4] > 1) return std::nullopt;
  s.from = static_cast<netsim::Side>(b[4]);
  s.seq = get_be32(b.data() + 5);
  s.ack = get_be32(b.data() + 9);
  s.window = get_be32(b.data() + 13);
  s.flags = b[17];
  const std::size_t n = b[18];
  if (n > 3 || b.size() < 19 + 8 * n) return std::nullopt;
  for (std::size_t i = 0; i < n; ++i) {
    const auto* q = b.data() + 19 + 8 * i;
    s.sack.push_back({get_be32(q), get_be32(q + 4)});
  }
  s.payload.assign(b.begin() + static_cast<std::ptrdiff_t>(19 + 8 * n), b.end());
  return s;
}

// Carries inner segments as uCOBS datagrams over one end of the tunnel.
class TunnelOutlet : public netsim::SegmentOutlet {
 public:
  TunnelOutlet(utcp::Host& outer, bool ack_priority) : outer_(outer), ack_priority_(ack_priority) {}
  void send(netsim::Segment s) override {
    const std::uint32_t tag = ack_priority_ && s.payload.empty() ? 0 : 1;
    ucobs::send(outer_, encode_inner(s), tag);
  }

 private:
  utcp::Host& outer_;
  bool ack_priority_;
};

}  // namespace

// An inner download (flow 1, server to client) and `competing` inner uploads
// ride through one outer connection. tcp mode is a plain ordered tunnel; utcp
// mode delivers tunnel datagrams unordered and sends inner pure ACKs ahead of
// queued upload data.
RunResult run_tunnel(const ExperimentSpec& spec) {
  detail::Path path(spec.sim);
  auto& sim = path.sim;
  const bool unordered = spec.unordered();
  auto outer = path.connect(0, unordered);

  TunnelOutlet server_out(*outer.server, unordered);
  TunnelOutlet client_out(*outer.client, unordered);

  std::vector<std::unique_ptr<utcp::Host>> inner;
  std::map<std::pair<std::uint32_t, netsim::Side>, utcp::Host*> by_end;
  auto make_inner = [&](std::uint32_t flow) {
    utcp::ConnectionConfig c;
    c.flow = flow;
    c.mss = kInnerMss;
    c.recv_capacity = kInnerWindow;
    c.side = netsim::Side::Server;
    inner.push_back(std::make_unique<utcp::Host>(sim, server_out, c));
    auto* s = inner.back().get();
    c.side = netsim::Side::Client;
    inner.push_back(std::make_unique<utcp::Host>(sim, client_out, c));
    auto* cl = inner.back().get();
    by_end[{flow, netsim::Side::Server}] = s;
    by_end[{flow, netsim::Side::Client}] = cl;
    return std::pair{s, cl};
  };

  std::uint64_t malformed = 0;
  auto decap = [&](utcp::Host& end, netsim::Side side) {
    auto rx = std::make_shared<ucobs::Receiver>();
    end.set_on_readable([&, rx, side, host = &end] {
      while (auto unit = host->connection().read()) {
        for (const auto& d : rx->on_unit(*unit)) {
          auto seg = decode_inner(d.payload);
          auto it = seg ? by_end.find({seg->flow, side}) : by_end.end();
          if (it == by_end.end()) {
            ++malformed;
            continue;
          }
          it->second->deliver(std::move(*seg));
        }
      }
    });
  };
  decap(*outer.server, netsim::Side::Server);
  decap(*outer.client, netsim::Side::Client);

  // Download.
  auto [dl_server, dl_client] = make_inner(1);
  IntervalSet got;
  std::optional<TimeUs> done;
  std::vector<std::pair<TimeUs, std::uint64_t>> progress;
  dl_client->set_on_readable([&, h = dl_client] {
    std::uint64_t added = 0;
    while (auto unit = h->connection().read()) added += got.add(unit->offset, unit->offset + unit->data.size());
    if (!added) return;
    progress.emplace_back(sim.now(), got.total());
    if (got.total() >= spec.bulk_bytes && !done) done = sim.now();
  });
  Bytes payload(spec.bulk_bytes, std::uint8_t{'d'});
  sim.at(0, [h = dl_server, &payload] { h->write(payload); });

  // Uploads.
  struct Upload {
    utcp::Host* client;
    std::uint64_t received = 0;
  };
  std::vector<Upload> uploads;
  for (std::size_t k = 0; k < spec.competing; ++k) {
    auto [s, c] = make_inner(static_cast<std::uint32_t>(2 + k));
    uploads.push_back({c, 0});
    s->set_on_readable([&, s, k] {
      while (auto unit = s->connection().read()) {
        if (!unit->out_of_order()) uploads[k].received += unit->data.size();
      }
    });
  }
  for (auto& u : uploads) {
    sim.at(0, [&, h = u.client] { detail::keep_busy(*h, 32 * 1024, [&] { return !done; }); });
  }

  sim.run(3600 * kSecond);

  bool conserved = got.total() == spec.bulk_bytes;
  std::uint64_t up_bytes = 0;
  for (const auto& u : uploads) {
    up_bytes += u.received;
    conserved = conserved && u.received == u.client->connection().acked_bytes() &&
                u.client->connection().all_acked();
  }

  RunResult out;
  for (std::size_t i = 0; i < progress.size(); ++i) {
    out.rows.push_back(ResultRow{i, 0, progress[i].first, progress[i].second, spec.mode_label(), "progress",
                                 static_cast<double>(progress[i].second)});
  }
  const double secs = done ? static_cast<double>(*done) / kSecond : 0.0;
  out.summary.push_back(detail::summary(spec, "download_bytes", static_cast<double>(got.total())));
  out.summary.push_back(detail::summary(spec, "completion_us", done ? static_cast<double>(*done) : 0.0));
  out.summary.push_back(
      detail::summary(spec, "throughput_bps", secs > 0 ? static_cast<double>(spec.bulk_bytes) * 8.0 / secs : 0.0));
  out.summary.push_back(detail::summary(spec, "upload_bytes", static_cast<double>(up_bytes)));
  out.summary.push_back(detail::summary(spec, "conserved", conserved ? 1.0 : 0.0));
  out.summary.push_back(detail::summary(spec, "malformed", static_cast<double>(malformed)));
  return out;
}

}  // namespace minion::harness
