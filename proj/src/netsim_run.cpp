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

#include <charconv>
#include <sstream>

#include "minion/netsim.hpp"
#include "minion/utcp.hpp"

namespace minion::netsim {

namespace {

template <typename T>
T parse_field(const std::string& field, std::size_t line_no) {
  T v{};
  auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || p != field.data() + field.size())
    throw Error(ErrorCode::Config,
                "workload line " + std::to_string(line_no) + ": bad number '" + field + "'");
  return v;
}

// Stream byte i of a workload write: a pattern that makes offset errors
// visible in traces and tests.
std::uint8_t pattern_byte(std::uint64_t i) { return static_cast<std::uint8_t>((i * 131 + 7) >> 3); }

}  // namespace

// One write per line: time_ms endpoint bytes [tag [flags [flow]]]
WorkloadScript parse_workload(std::string_view text) {
  WorkloadScript out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::vector<std::string> f;
    for (std::string tok; fields >> tok;) f.push_back(tok);
    if (f.empty()) continue;
    if (f.size() < 3 || f.size() > 6)
      throw Error(ErrorCode::Config, "workload line " + std::to_string(line_no) +
                                         ": expected time_ms endpoint bytes [tag [flags [flow]]]");
    WorkloadAction a;
    a.at = parse_field<TimeUs>(f[0], line_no) * kMillisecond;
    if (f[1] == "server") {
      a.endpoint = Side::Server;
    } else if (f[1] == "client") {
      a.endpoint = Side::Client;
    } else {
      throw Error(ErrorCode::Config, "workload line " + std::to_string(line_no) +
                                         ": unknown endpoint '" + f[1] + "'");
    }
    a.bytes = parse_field<std::size_t>(f[2], line_no);
    if (f.size() > 3) a.tag = parse_field<std::uint32_t>(f[3], line_no);
    if (f.size() > 4) a.flags = static_cast<std::uint8_t>(parse_field<unsigned>(f[4], line_no));
    if (f.size() > 5) a.flow = parse_field<std::uint32_t>(f[5], line_no);
    out.push_back(a);
  }
  return out;
}

EventTrace run(const SimConfig& config, const WorkloadScript& workload, TimeUs until,
               const RunOptions& options) {
  config.validate();
  for (const auto& a : workload) {
    if (a.flow != 0)
      throw Error(ErrorCode::Config, "workload references unknown flow " + std::to_string(a.flow));
    if (a.bytes == 0) throw Error(ErrorCode::Config, "workload write of zero bytes");
    if (a.at < 0) throw Error(ErrorCode::Config, "workload time before zero");
  }

  Simulator sim;
  Network net(sim, config);
  utcp::ConnectionConfig base;
  base.unordered_recv = options.unordered_recv;
  base.unordered_send = options.unordered_send;
  auto server_cfg = base;
  server_cfg.side = Side::Server;
  auto client_cfg = base;
  client_cfg.side = Side::Client;
  utcp::Host server(sim, net, server_cfg);
  utcp::Host client(sim, net, client_cfg);
  net.attach(0, Side::Server, server);
  net.attach(0, Side::Client, client);

  auto drain = [](utcp::Host& h) {
    return [&h] {
      while (h.connection().read()) {
      }
    };
  };
  server.set_on_readable(drain(server));
  client.set_on_readable(drain(client));

  std::uint64_t written[2] = {0, 0};
  for (const auto& a : workload) {
    auto& host = a.endpoint == Side::Server ? server : client;
    Bytes data(a.bytes);
    auto& base_off = written[static_cast<int>(a.endpoint)];
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = pattern_byte(base_off + i);
    base_off += data.size();
    sim.at(a.at, [&host, data = std::move(data), a] { host.write(data, a.flags, a.tag); });
  }
  sim.run(until);
  return sim.trace();
}

}  // namespace minion::netsim
