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
#include <map>

#include "doctest.h"
#include "minion/utcp.hpp"
#include "support.hpp"

using namespace minion;
using namespace minion::utcp;
using netsim::Side;

namespace {

ConnectionConfig config(Side side, bool unordered = false) {
  ConnectionConfig c;
  c.side = side;
  c.unordered_recv = unordered;
  c.unordered_send = unordered;
  return c;
}

std::vector<std::uint32_t> tags(const Connection& c) {
  std::vector<std::uint32_t> out;
  for (const auto& e : c.send_queue()) out.push_back(e.tag);
  return out;
}

std::vector<std::size_t> sizes(const std::vector<Segment>& segs) {
  std::vector<std::size_t> out;
  for (const auto& s : segs) out.push_back(s.payload.size());
  return out;
}

Segment data_at(const Connection& receiver, std::uint64_t offset, Bytes payload) {
  Segment s;
  s.from = netsim::peer(receiver.config().side);
  s.seq = receiver.config().isn_remote + static_cast<std::uint32_t>(offset);
  s.ack = receiver.config().isn_local;
  s.window = 65535;
  s.flags = netsim::seg_flags::kAck;
  s.payload = std::move(payload);
  return s;
}

// Lossless zero-delay loopback between two connections.
struct Loop {
  Connection a{config(Side::Server)};
  Connection b{config(Side::Client)};
  std::vector<Segment> wire;  // every data segment a sent
  std::vector<DeliveryUnit> got;

  explicit Loop(bool unordered = false) : a(config(Side::Server, unordered)), b(config(Side::Client, unordered)) {}

  void run(TimeUs now = 0) {
    for (;;) {
      auto segs = a.dequeue_for_transmit(now);
      if (segs.empty()) return;
      for (auto& s : segs) {
        wire.push_back(s);
        auto r = b.on_segment(s, now);
        REQUIRE(r.ack.has_value());
        a.on_segment(*r.ack, now);
        while (auto u = b.read()) got.push_back(std::move(*u));
      }
    }
  }
};

}  // namespace

TEST_CASE("priority write goes ahead of untransmitted lower-priority data") {
  Connection c(config(Side::Server, true));
  c.write(test::pattern(10), 0, 5);
  c.write(test::pattern(10), 0, 1);
  CHECK(tags(c) == std::vector<std::uint32_t>{1, 5});
}

TEST_CASE("priority write never passes partly transmitted data") {
  auto cfg = config(Side::Server, true);
  cfg.mss = 3;
  cfg.initial_cwnd_segments = 1;
  Connection c(cfg);
  c.write(test::pattern(10), 0, 5);
  auto segs = c.dequeue_for_transmit(0);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0].payload.size() == 3);
  CHECK(c.send_queue().front().transmitted_bytes == 3);
  c.write(test::pattern(4), 0, 1);
  CHECK(tags(c) == std::vector<std::uint32_t>{5, 1});
}

TEST_CASE("equal tags stay FIFO") {
  Connection c(config(Side::Server, true));
  const auto w1 = c.write(test::pattern(5), 0, 2);
  const auto w2 = c.write(test::pattern(5), 0, 2);
  const auto w3 = c.write(test::pattern(5), 0, 1);
  std::vector<WriteId> ids;
  for (const auto& e : c.send_queue()) ids.push_back(e.id);
  CHECK(ids == std::vector<WriteId>{w3, w1, w2});
}

TEST_CASE("ordered send ignores tags") {
  Connection c(config(Side::Server, false));
  c.write(test::pattern(5), 0, 9);
  c.write(test::pattern(5), 0, 1);
  CHECK(tags(c) == std::vector<std::uint32_t>{9, 1});
}

TEST_CASE("squash discards untransmitted data with the same tag") {
  Connection c(config(Side::Server, true));
  const auto old = c.write(test::pattern(7), 0, 1);
  c.write(test::pattern(9), 0, 2);
  const auto fresh = c.write(test::pattern(3), send_flags::kSquash, 1);
  CHECK(tags(c) == std::vector<std::uint32_t>{1, 2});
  CHECK(c.send_queue().front().id == fresh);
  CHECK(c.write_state(old) == WriteState::Squashed);
  CHECK(c.unsent_bytes() == 12);
}

TEST_CASE("writes are rejected when empty or closed") {
  Connection c(config(Side::Server));
  CHECK_THROWS_AS(c.write(Bytes{}), Error);
  c.close();
  CHECK_THROWS_AS(c.write(test::pattern(1)), Error);
}

TEST_CASE("two full segments leave with consecutive sequence numbers") {
  auto cfg = config(Side::Server);
  cfg.initial_cwnd_segments = 2;
  Connection c(cfg);
  c.write(test::pattern(1448));
  c.write(test::pattern(1448));
  auto segs = c.dequeue_for_transmit(0);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].seq == 1);
  CHECK(segs[1].seq == 1 + 1448);
  CHECK(sizes(segs) == std::vector<std::size_t>{1448, 1448});
}

TEST_CASE("segments never span write boundaries in unordered send mode") {
  Connection c(config(Side::Server, true));
  c.write(test::pattern(500));
  c.write(test::pattern(2000));
  CHECK(sizes(c.dequeue_for_transmit(0)) == std::vector<std::size_t>{500, 1448, 552});

  Connection plain(config(Side::Server, false));
  plain.write(test::pattern(500));
  plain.write(test::pattern(2000));
  CHECK(sizes(plain.dequeue_for_transmit(0)) == std::vector<std::size_t>{1448, 1052});
}

TEST_CASE("priority data inserted after a partial send follows the whole partial entry") {
  auto cfg = config(Side::Server, true);
  cfg.initial_cwnd_segments = 1;
  Connection c(cfg);
  c.write(test::pattern(4000), 0, 5);
  auto first = c.dequeue_for_transmit(0);
  REQUIRE(first.size() == 1);
  c.write(test::pattern(100, 77), 0, 1);
  // Open the window wide and drain everything.
  Segment ack;
  ack.from = Side::Client;
  ack.flags = netsim::seg_flags::kAck;
  ack.ack = 1 + 1448;
  ack.window = 1 << 20;
  c.on_ack(ack, 10 * kMillisecond);
  std::vector<Segment> rest;
  for (int i = 0; i < 10; ++i) {
    auto s = c.dequeue_for_transmit(10 * kMillisecond);
    rest.insert(rest.end(), s.begin(), s.end());
    if (c.unsent_bytes() == 0) break;
    ack.ack = rest.back().seq + static_cast<std::uint32_t>(rest.back().payload.size());
    c.on_ack(ack, 20 * kMillisecond);
  }
  REQUIRE_FALSE(rest.empty());
  CHECK(rest.back().payload == test::pattern(100, 77));
  CHECK(rest.back().seq == 1 + 4000);
}

TEST_CASE("in-order arrival is delivered with offset and no flag") {
  Connection r(config(Side::Client, true));
  auto res = r.on_segment(data_at(r, 0, test::pattern(100)), 0);
  REQUIRE(res.ack.has_value());
  CHECK(res.ack->ack == 1 + 100);
  REQUIRE(res.delivered.size() == 1);
  CHECK(res.delivered[0].offset == 0);
  CHECK_FALSE(res.delivered[0].out_of_order());
}

TEST_CASE("out-of-order arrival: unordered mode delivers at once, ordered mode waits") {
  for (bool unordered : {true, false}) {
    CAPTURE(unordered);
    Connection r(config(Side::Client, unordered));
    r.on_segment(data_at(r, 0, test::pattern(100)), 0);
    while (r.read()) {
    }
    const auto window = r.adv_window();
    auto res = r.on_segment(data_at(r, 200, test::pattern(100, 9)), 0);
    REQUIRE(res.ack.has_value());
    CHECK(res.ack->ack == 1 + 100);
    REQUIRE(res.ack->sack.size() == 1);
    CHECK(res.ack->sack[0] == netsim::SackBlock{201, 301});
    CHECK(r.adv_window() == window);
    if (unordered) {
      auto u = r.read();
      REQUIRE(u.has_value());
      CHECK(u->out_of_order());
      CHECK(u->offset == 200);
      CHECK(u->data == test::pattern(100, 9));
    } else {
      CHECK_FALSE(r.read().has_value());
    }

    // The gap filler releases the filler and, again, the stored range.
    auto fill = r.on_segment(data_at(r, 100, test::pattern(100, 5)), 0);
    CHECK(fill.ack->ack == 1 + 300);
    CHECK(fill.ack->sack.empty());
    std::vector<DeliveryUnit> units;
    while (auto u = r.read()) units.push_back(*u);
    REQUIRE(units.size() == 2);
    CHECK(units[0] == DeliveryUnit{0, 100, test::pattern(100, 5)});
    CHECK(units[1] == DeliveryUnit{0, 200, test::pattern(100, 9)});
  }
}

TEST_CASE("duplicate data below the ack point gives a pure ack and no delivery") {
  Connection r(config(Side::Client, true));
  r.on_segment(data_at(r, 0, test::pattern(100)), 0);
  auto res = r.on_segment(data_at(r, 0, test::pattern(100)), 0);
  REQUIRE(res.ack.has_value());
  CHECK(res.ack->ack == 101);
  CHECK(res.delivered.empty());
  CHECK(r.stats().duplicate_segments == 1);
}

TEST_CASE("read on empty buffers would block") {
  Connection r(config(Side::Client, true));
  CHECK_FALSE(r.read().has_value());
}

TEST_CASE("advertised window depends only on capacity and the ack point") {
  auto cfg = config(Side::Client, true);
  cfg.recv_capacity = 10000;
  Connection r(cfg);
  CHECK(r.adv_window() == 10000);
  SplitMix64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t off = 1000 + rng.below(8000);
    const auto before = r.adv_window();
    auto res = r.on_segment(data_at(r, off, test::pattern(1 + rng.below(500))), 0);
    // Only out-of-order data here: the ack point stays at zero.
    CHECK(res.ack->ack == 1);
    CHECK(r.adv_window() == before);
    while (r.read()) {
    }
    CHECK(r.adv_window() == before);
  }
}

TEST_CASE("shim headers") {
  DeliveryUnit u{delivery_flags::kOutOfOrder, 0x01020304, {}};
  auto h = encode_recv_header(u);
  CHECK(h == std::array<std::uint8_t, 5>{1, 1, 2, 3, 4});
  auto s = encode_send_header(send_flags::kSquash, 7);
  auto d = decode_shim_header(s);
  CHECK(d.flags == send_flags::kSquash);
  CHECK(d.value == 7);
}

TEST_CASE("three duplicate acks trigger one retransmission of the original bytes") {
  auto cfg = config(Side::Server);
  cfg.initial_cwnd_segments = 10;
  Connection s(cfg);
  Connection r(config(Side::Client));
  s.write(test::pattern(5 * 1448, 3));
  auto segs = s.dequeue_for_transmit(0);
  REQUIRE(segs.size() == 5);
  std::vector<Segment> acks;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (i == 1) continue;  // lost
    acks.push_back(*r.on_segment(segs[i], 1000).ack);
  }
  std::vector<Segment> retx;
  for (std::size_t i = 0; i < acks.size(); ++i) {
    s.on_ack(acks[i], 50000);
    auto out = s.dequeue_for_transmit(50000);
    retx.insert(retx.end(), out.begin(), out.end());
  }
  REQUIRE(retx.size() == 1);
  CHECK(retx[0].seq == segs[1].seq);
  CHECK(retx[0].payload == segs[1].payload);
  CHECK((retx[0].flags & netsim::seg_flags::kRetransmit) != 0);
  CHECK(s.stats().fast_retransmits == 1);
  CHECK(s.congestion().state == CcState::FastRecovery);
  CHECK(s.congestion().ssthresh >= 2 * cfg.mss);
}

TEST_CASE("slow start grows by the acked bytes") {
  Loop l;
  l.a.write(test::pattern(50 * 1448));
  const auto start = l.a.congestion().cwnd;
  CHECK(start == 3 * 1448);
  auto segs = l.a.dequeue_for_transmit(0);
  REQUIRE(segs.size() == 3);
  // Each ack clocks out new data, so the window stays in use.
  for (auto& s : segs) {
    l.a.on_segment(*l.b.on_segment(s, 0).ack, 1000);
    l.a.dequeue_for_transmit(1000);
  }
  CHECK(l.a.congestion().cwnd == 6 * 1448);
  CHECK(l.a.bytes_in_flight() == 6 * 1448);
}

TEST_CASE("an idle sender's window does not grow") {
  Loop l;
  l.a.write(test::pattern(3 * 1448));
  auto segs = l.a.dequeue_for_transmit(0);
  for (auto& s : segs) l.a.on_segment(*l.b.on_segment(s, 0).ack, 1000);
  CHECK(l.a.congestion().cwnd < 6 * 1448);
}

TEST_CASE("retransmission timer backs off and rearms") {
  Connection s(config(Side::Server));
  s.write(test::pattern(1000));
  auto first = s.dequeue_for_transmit(0);
  REQUIRE(first.size() == 1);
  REQUIRE(s.timer_deadline().has_value());
  CHECK(*s.timer_deadline() == kSecond);
  CHECK_FALSE(s.on_timer(kSecond - 1));
  CHECK(s.on_timer(kSecond));
  auto again = s.dequeue_for_transmit(kSecond);
  REQUIRE(again.size() == 1);
  CHECK(again[0].payload == first[0].payload);
  CHECK(s.congestion().cwnd == 1448);
  REQUIRE(s.timer_deadline().has_value());
  CHECK(*s.timer_deadline() == 3 * kSecond);
  CHECK(s.stats().timeouts == 1);
}

TEST_CASE("acks beyond what was sent are ignored and counted") {
  Connection s(config(Side::Server));
  s.write(test::pattern(100));
  s.dequeue_for_transmit(0);
  Segment ack;
  ack.from = Side::Client;
  ack.flags = netsim::seg_flags::kAck;
  ack.ack = 1 + 5000;
  ack.window = 65535;
  s.on_ack(ack, 10);
  CHECK(s.stats().invalid_acks == 1);
  CHECK(s.acked_bytes() == 0);
}

TEST_CASE("write states follow the entry through the connection") {
  Loop l;
  const auto id = l.a.write(test::pattern(3000));
  CHECK(l.a.write_state(id) == WriteState::Queued);
  l.run();
  CHECK(l.a.write_state(id) == WriteState::Acked);
  CHECK(l.a.all_acked());
  CHECK_THROWS_AS(l.a.write_state(99), Error);
}

TEST_CASE("priority safety and stream integrity under random write schedules") {
  SplitMix64 rng(17);
  for (int round = 0; round < 20; ++round) {
    Loop l(true);
    // Each byte names its write, so the wire shows where every write went.
    std::map<std::uint8_t, std::uint32_t> tag_of;
    std::map<std::uint8_t, std::set<std::uint8_t>> started_before;  // write -> writes already on the wire
    std::set<std::uint8_t> started;
    for (std::uint8_t w = 0; w < 120; ++w) {
      started_before[w] = started;
      const std::uint32_t tag = static_cast<std::uint32_t>(rng.below(4));
      tag_of[w] = tag;
      l.a.write(Bytes(1 + rng.below(3000), w), 0, tag);
      if (rng.below(3) == 0) {
        auto segs = l.a.dequeue_for_transmit(0);
        for (auto& s : segs) {
          started.insert(s.payload[0]);
          l.wire.push_back(s);
          l.a.on_segment(*l.b.on_segment(s, 0).ack, 0);
          while (auto u = l.b.read()) l.got.push_back(std::move(*u));
        }
      }
    }
    l.run();
    std::map<std::uint8_t, std::pair<std::uint32_t, std::uint32_t>> span;  // write -> [lo, hi)
    for (const auto& s : l.wire) {
      REQUIRE_FALSE(s.payload.empty());
      // No segment mixes writes.
      CHECK(std::all_of(s.payload.begin(), s.payload.end(), [&](std::uint8_t b) { return b == s.payload[0]; }));
      auto [it, fresh] = span.try_emplace(s.payload[0], s.seq, s.seq + static_cast<std::uint32_t>(s.size()));
      if (!fresh) {
        it->second.first = std::min(it->second.first, s.seq);
        it->second.second = std::max(it->second.second, s.seq + static_cast<std::uint32_t>(s.size()));
      }
    }
    CHECK(span.size() == 120);
    for (const auto& [w, before] : started_before) {
      for (std::uint8_t e : before) CHECK(span[w].first >= span[e].second);
    }
    // The receiver saw one hole-free stream equal to what was sent.
    std::uint64_t next = 0;
    for (const auto& u : l.got) {
      CHECK(u.offset == next);
      next += u.data.size();
    }
    CHECK(next == l.a.acked_bytes());
  }
}

TEST_CASE("offset correctness and coverage over a lossy simulated path") {
  for (bool unordered : {false, true}) {
    CAPTURE(unordered);
    netsim::SimConfig sc;
    sc.loss_rate = 0.08;
    sc.seed = 21;
    sc.rtt_us = 40 * kMillisecond;
    netsim::Simulator sim;
    netsim::Network net(sim, sc);
    Host server(sim, net, config(Side::Server, unordered));
    Host client(sim, net, config(Side::Client, unordered));
    net.attach(0, Side::Server, server);
    net.attach(0, Side::Client, client);
    const Bytes stream = test::pattern(400000, 11);
    Bytes covered(stream.size(), 0);
    std::size_t ooo = 0;
    client.set_on_readable([&] {
      while (auto u = client.connection().read()) {
        REQUIRE(u->offset + u->data.size() <= stream.size());
        CHECK(std::equal(u->data.begin(), u->data.end(), stream.begin() + u->offset));
        std::fill_n(covered.begin() + u->offset, u->data.size(), 1);
        if (u->out_of_order()) ++ooo;
      }
    });
    sim.at(0, [&] { server.write(stream); });
    sim.run(600 * kSecond);
    CHECK(std::all_of(covered.begin(), covered.end(), [](std::uint8_t c) { return c == 1; }));
    CHECK(server.connection().all_acked());
    if (unordered) {
      CHECK(ooo > 0);
    } else {
      CHECK(ooo == 0);
    }
  }
}

TEST_CASE("window update reopens a window closed by a slow reader") {
  auto cfg = config(Side::Client);
  cfg.recv_capacity = 4 * 1448;
  Connection r(cfg);
  for (int i = 0; i < 4; ++i) r.on_segment(data_at(r, i * 1448, test::pattern(1448)), 0);
  CHECK(r.adv_window() == 0);
  CHECK_FALSE(r.window_update().has_value());
  while (r.read()) {
  }
  auto upd = r.window_update();
  REQUIRE(upd.has_value());
  CHECK(upd->window == 4 * 1448);
  CHECK(upd->payload.empty());
  CHECK_FALSE(r.window_update().has_value());
}
