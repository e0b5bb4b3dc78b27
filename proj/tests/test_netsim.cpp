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

#include "doctest.h"
#include "minion/netsim.hpp"
#include "support.hpp"

using namespace minion;
using namespace minion::netsim;

namespace {

struct Collect : SegmentSink {
  Simulator* sim = nullptr;
  std::vector<std::pair<TimeUs, Segment>> got;
  void deliver(Segment s) override { got.emplace_back(sim->now(), std::move(s)); }
};

Segment data_segment(std::uint32_t seq, std::size_t n, Side from = Side::Server) {
  Segment s;
  s.from = from;
  s.seq = seq;
  s.payload = test::pattern(n, static_cast<std::uint8_t>(seq));
  return s;
}

std::vector<const TraceEvent*> of_kind(const EventTrace& t, TraceKind k) {
  std::vector<const TraceEvent*> out;
  for (const auto& e : t.events()) {
    if (e.kind == k) out.push_back(&e);
  }
  return out;
}

}  // namespace

TEST_CASE("serialization delay") {
  CHECK(serialization_delay(1500, 3e6) == 4000);
  CHECK(serialization_delay(0, 3e6) == 0);
  CHECK(serialization_delay(1448, 10e6) == 1158);
}

TEST_CASE("link delay is serialization plus half the rtt") {
  SimConfig c;
  c.rtt_us = 60 * kMillisecond;
  c.bandwidth_down_bps = 3e6;
  Simulator sim;
  Network net(sim, c);
  Collect client, server;
  client.sim = server.sim = &sim;
  net.attach(0, Side::Client, client);
  net.attach(0, Side::Server, server);
  net.send(data_segment(1, 1500));
  Segment ack;
  ack.from = Side::Client;
  net.send(ack);
  sim.run(kSecond);
  REQUIRE(client.got.size() == 1);
  CHECK(client.got[0].first == 30 * kMillisecond + 4 * kMillisecond);
  REQUIRE(server.got.size() == 1);
  CHECK(server.got[0].first == 30 * kMillisecond);
}

TEST_CASE("links queue FIFO behind the serializer") {
  SimConfig c;
  c.rtt_us = 20 * kMillisecond;
  c.bandwidth_down_bps = 1e6;
  Simulator sim;
  Network net(sim, c);
  Collect client, server;
  client.sim = server.sim = &sim;
  net.attach(0, Side::Client, client);
  net.attach(0, Side::Server, server);
  for (std::uint32_t i = 0; i < 5; ++i) net.send(data_segment(1 + 1000 * i, 1000));
  sim.run(kSecond);
  REQUIRE(client.got.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(client.got[i].second.seq == 1 + 1000 * i);
    CHECK(client.got[i].first == static_cast<TimeUs>(8000 * (i + 1) + 10000));
  }
}

TEST_CASE("drop fraction follows the loss rate") {
  Simulator sim;
  Link link(sim, Direction::Down, 1e12, 0, 0.5, 99, {}, std::nullopt);
  for (int i = 0; i < 100000; ++i) link.admit(100, 0);
  const double f = static_cast<double>(link.stats().drops) / 100000.0;
  CHECK(f == doctest::Approx(0.5).epsilon(0.02));
  CHECK(link.stats().transmissions == 100000);
}

TEST_CASE("scripted drops hit exact transmission indices") {
  Simulator sim;
  Link link(sim, Direction::Up, 1e9, 0, 0.0, 1, {0, 2}, std::nullopt);
  CHECK_FALSE(link.admit(10, 0).has_value());
  CHECK(link.admit(10, 0).has_value());
  CHECK_FALSE(link.admit(10, 0).has_value());
  CHECK(link.admit(10, 0).has_value());
}

TEST_CASE("resegment splits a run at the mtu with contiguous sequence numbers") {
  std::vector<Segment> run{data_segment(101, 2896)};
  auto out = resegment(run, 1000);
  REQUIRE(out.size() == 3);
  CHECK(out[0].payload.size() == 1000);
  CHECK(out[1].payload.size() == 1000);
  CHECK(out[2].payload.size() == 896);
  CHECK(out[0].seq == 101);
  CHECK(out[1].seq == 1101);
  CHECK(out[2].seq == 2101);
  Bytes joined;
  for (const auto& s : out) joined.insert(joined.end(), s.payload.begin(), s.payload.end());
  CHECK(joined == run[0].payload);
  CHECK_THROWS_AS(resegment(run, 0), Error);
}

TEST_CASE("middlebox merges three 500-byte segments into two of 750") {
  SimConfig c;
  c.middlebox = ResegmenterConfig{750, true, 0};
  Simulator sim;
  Network net(sim, c);
  Collect client, server;
  client.sim = server.sim = &sim;
  net.attach(0, Side::Client, client);
  net.attach(0, Side::Server, server);
  Bytes sent;
  for (std::uint32_t i = 0; i < 3; ++i) {
    auto s = data_segment(1 + 500 * i, 500);
    sent.insert(sent.end(), s.payload.begin(), s.payload.end());
    net.send(std::move(s));
  }
  sim.run(kSecond);
  REQUIRE(client.got.size() == 2);
  CHECK(client.got[0].second.payload.size() == 750);
  CHECK(client.got[1].second.payload.size() == 750);
  CHECK(client.got[0].second.seq == 1);
  CHECK(client.got[1].second.seq == 751);
  Bytes got = client.got[0].second.payload;
  got.insert(got.end(), client.got[1].second.payload.begin(), client.got[1].second.payload.end());
  CHECK(got == sent);
}

TEST_CASE("middlebox without coalescing passes small segments unchanged") {
  Resegmenter r(ResegmenterConfig{1500, false, 0});
  bool flush = false;
  auto out = r.accept(data_segment(7, 100), flush);
  REQUIRE(out.size() == 1);
  CHECK(out[0].seq == 7);
  CHECK(out[0].payload.size() == 100);
  CHECK_FALSE(r.holding());
}

TEST_CASE("middlebox forwards out-of-order segments as they are") {
  Resegmenter r(ResegmenterConfig{1000, true, 0});
  bool flush = false;
  CHECK(r.accept(data_segment(1, 400), flush).empty());
  CHECK(r.holding());
  auto out = r.accept(data_segment(5001, 300), flush);
  // The held run is flushed first, then the stray segment goes through.
  REQUIRE(out.size() == 2);
  CHECK(out[0].seq == 1);
  CHECK(out[0].payload.size() == 400);
  CHECK(out[1].seq == 5001);
}

TEST_CASE("resegmenter conserves bytes under random segment sizes") {
  SplitMix64 rng(5);
  for (int round = 0; round < 50; ++round) {
    const std::size_t mtu = 64 + rng.below(1500);
    Resegmenter r(ResegmenterConfig{mtu, true, 0});
    Bytes in, outb;
    std::uint32_t seq = 1;
    std::uint32_t next_out = 1;
    auto take = [&](std::vector<Segment> v) {
      for (auto& s : v) {
        CHECK(s.seq == next_out);
        next_out += static_cast<std::uint32_t>(s.payload.size());
        outb.insert(outb.end(), s.payload.begin(), s.payload.end());
      }
    };
    for (int i = 0; i < 40; ++i) {
      const std::size_t n = 1 + rng.below(3000);
      Segment s = data_segment(seq, n);
      seq += static_cast<std::uint32_t>(n);
      in.insert(in.end(), s.payload.begin(), s.payload.end());
      bool flush = false;
      take(r.accept(std::move(s), flush));
    }
    take(r.flush());
    CHECK(outb == in);
  }
}

TEST_CASE("config parsing") {
  auto c = parse_config("# path\nrtt = 100\nloss=0.02\nbw-down=3e6\nseed=9\nmtu=750\n");
  CHECK(c.rtt_us == 100 * kMillisecond);
  CHECK(c.loss_rate == doctest::Approx(0.02));
  CHECK(c.bandwidth_down_bps == doctest::Approx(3e6));
  CHECK(c.seed == 9);
  REQUIRE(c.middlebox.has_value());
  CHECK(c.middlebox->mtu == 750);
  CHECK_THROWS_AS(parse_config("loss=2"), Error);
  CHECK_THROWS_AS(parse_config("bogus=1"), Error);
  CHECK_THROWS_AS(parse_config("rtt"), Error);
}

TEST_CASE("workload parsing") {
  auto w = parse_workload("0 server 1448\n# comment\n20 client 10 3 1\n");
  REQUIRE(w.size() == 2);
  CHECK(w[0].endpoint == Side::Server);
  CHECK(w[0].bytes == 1448);
  CHECK(w[1].at == 20 * kMillisecond);
  CHECK(w[1].tag == 3);
  CHECK(w[1].flags == 1);
  CHECK_THROWS_AS(parse_workload("0 nobody 1"), Error);
  CHECK_THROWS_AS(parse_workload("0 server"), Error);
}

TEST_CASE("run: lossless one-segment send") {
  SimConfig c;
  c.rtt_us = 60 * kMillisecond;
  const auto trace = run(c, parse_workload("0 server 1448"), 2 * kSecond);
  auto arrivals = of_kind(trace, TraceKind::Arrive);
  REQUIRE(arrivals.size() == 2);
  const TimeUs ser = serialization_delay(1448, c.bandwidth_down_bps);
  CHECK(arrivals[0]->endpoint == Side::Client);
  CHECK(arrivals[0]->len == 1448);
  CHECK(arrivals[0]->time == 30 * kMillisecond + ser);
  CHECK(arrivals[1]->endpoint == Side::Server);
  CHECK(arrivals[1]->len == 0);
  CHECK(arrivals[1]->time == 60 * kMillisecond + ser);
  CHECK(of_kind(trace, TraceKind::Drop).empty());
}

TEST_CASE("run: identical inputs give identical traces") {
  SimConfig c;
  c.loss_rate = 0.1;
  c.seed = 42;
  const auto w = parse_workload("0 server 100000\n5 client 20000\n");
  const auto a = run(c, w, 30 * kSecond);
  const auto b = run(c, w, 30 * kSecond);
  CHECK(a.events() == b.events());
  CHECK(a.to_csv() == b.to_csv());
  c.seed = 43;
  CHECK(run(c, w, 30 * kSecond).events() != a.events());
}

TEST_CASE("run: total loss gives no arrivals, only retransmissions") {
  SimConfig c;
  c.loss_rate = 1.0;
  const auto trace = run(c, parse_workload("0 server 1000"), 10 * kSecond);
  CHECK(of_kind(trace, TraceKind::Arrive).empty());
  CHECK(of_kind(trace, TraceKind::Send).empty());
  const auto drops = of_kind(trace, TraceKind::Drop);
  REQUIRE(drops.size() >= 3);
  CHECK((drops[0]->flags & seg_flags::kRetransmit) == 0);
  for (std::size_t i = 1; i < drops.size(); ++i) CHECK((drops[i]->flags & seg_flags::kRetransmit) != 0);
  CHECK(of_kind(trace, TraceKind::Timeout).size() == drops.size() - 1);
}

TEST_CASE("trace times never decrease and links never reorder") {
  SimConfig c;
  c.loss_rate = 0.05;
  c.seed = 11;
  const auto trace = run(c, parse_workload("0 server 300000\n0 client 50000\n"), 60 * kSecond);
  TimeUs last = 0;
  for (const auto& e : trace.events()) {
    CHECK(e.time >= last);
    last = e.time;
  }
  // Per direction, arrivals keep the order of successful sends.
  for (Side from : {Side::Server, Side::Client}) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> sent, arrived;
    for (const auto& e : trace.events()) {
      if (e.kind == TraceKind::Send && e.endpoint == from) sent.emplace_back(e.seq, e.ack);
      if (e.kind == TraceKind::Arrive && e.endpoint == peer(from)) arrived.emplace_back(e.seq, e.ack);
    }
    REQUIRE(arrived.size() <= sent.size());
    CHECK(std::equal(arrived.begin(), arrived.end(), sent.begin()));
  }
}

TEST_CASE("trace csv layout") {
  SimConfig c;
  const auto trace = run(c, parse_workload("0 server 10"), kSecond);
  const auto csv = trace.to_csv();
  CHECK(csv.rfind("time_us,kind,endpoint,seq,len,flags\n", 0) == 0);
  CHECK(csv.find(",send,server,1,10,") != std::string::npos);
}

TEST_CASE("simulator runs ties in insertion order") {
  Simulator sim;
  std::vector<int> order;
  sim.at(5, [&] { order.push_back(1); });
  sim.at(5, [&] { order.push_back(2); });
  sim.at(3, [&] { order.push_back(0); });
  sim.at(9, [&] { order.push_back(3); });
  CHECK(sim.run(6) == 3);
  CHECK(order == std::vector<int>{0, 1, 2});
  CHECK(sim.now() == 6);
  sim.run(100);
  CHECK(order.back() == 3);
}
