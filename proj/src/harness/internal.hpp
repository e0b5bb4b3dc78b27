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

#include <memory>

#include "minion/harness.hpp"
#include "minion/utcp.hpp"
#include "minion/utls.hpp"

namespace minion::harness::detail {

// One simulated path with its connections. Hosts are heap-allocated so their
// addresses stay fixed while callbacks refer to them.
struct Path {
  explicit Path(const netsim::SimConfig& config) : net(sim, config) {}

  struct Pair {
    utcp::Host* server = nullptr;
    utcp::Host* client = nullptr;
  };

  Pair connect(std::uint32_t flow, bool unordered, std::size_t recv_capacity = 256 * 1024) {
    utcp::ConnectionConfig c;
    c.flow = flow;
    c.unordered_recv = unordered;
    c.unordered_send = unordered;
    c.recv_capacity = recv_capacity;
    c.side = netsim::Side::Server;
    hosts.push_back(std::make_unique<utcp::Host>(sim, net, c));
    Pair p;
    p.server = hosts.back().get();
    c.side = netsim::Side::Client;
    hosts.push_back(std::make_unique<utcp::Host>(sim, net, c));
    p.client = hosts.back().get();
    net.attach(flow, netsim::Side::Server, *p.server);
    net.attach(flow, netsim::Side::Client, *p.client);
    return p;
  }

  netsim::Simulator sim;
  netsim::Network net;
  std::vector<std::unique_ptr<utcp::Host>> hosts;
};

// Keeps a bulk sender's queue topped up while `active` returns true.
inline void keep_busy(utcp::Host& host, std::size_t backlog, std::function<bool()> active) {
  auto chunk = std::make_shared<Bytes>(16 * 1024, std::uint8_t{0x5a});
  auto refill = [&host, backlog, active, chunk] {
    while (active() && host.connection().unsent_bytes() < backlog) host.write(*chunk);
  };
  host.set_on_acked(refill);
  refill();
}

inline void drain_discard(utcp::Host& host) {
  host.set_on_readable([&host] {
    while (host.connection().read()) {
    }
  });
}

inline SummaryRow summary(const ExperimentSpec& spec, std::string metric, double value) {
  return SummaryRow{spec.name, spec.mode_label(), spec.sim.seed, std::move(metric), value};
}

// Message id in the first eight payload bytes, the rest a filler pattern.
inline Bytes tagged_payload(std::uint64_t id, std::size_t size) {
  Bytes b(std::max<std::size_t>(size, 8));
  put_be64(b.data(), id);
  for (std::size_t i = 8; i < b.size(); ++i) b[i] = static_cast<std::uint8_t>(id * 7 + i);
  return b;
}

// Per-run record-layer keys.
inline utls::CipherSuiteState session_keys(std::uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, "session-keys"));
  Bytes enc(utls::kKeySize), mac(32);
  rng.fill(enc);
  rng.fill(mac);
  return utls::CipherSuiteState::block(std::move(enc), std::move(mac));
}

}  // namespace minion::harness::detail
