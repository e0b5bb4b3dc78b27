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

#include "internal.hpp"
#include "minion/ucobs.hpp"

namespace minion::harness {

// Saturated sender of uCOBS messages. Every `priority_every`-th message is
// high priority (tag 0), the rest low (tag 1). The application keeps about
// `backlog` unsent bytes queued.
RunResult run_priority(const ExperimentSpec& spec) {
  detail::Path path(spec.sim);
  auto conn = path.connect(0, spec.unordered());
  auto& sim = path.sim;

  struct Message {
    TimeUs queued = 0;
    std::uint64_t offset = 0;
    std::optional<TimeUs> delivered;
    bool high = false;
  };
  std::vector<Message> msgs(spec.count);
  std::size_t next = 0;
  auto* server = conn.server;
  auto refill = [&] {
    while (next < spec.count && server->connection().unsent_bytes() < spec.backlog) {
      const bool high = (next + 1) % spec.priority_every == 0;
      msgs[next].queued = sim.now();
      msgs[next].high = high;
      const Bytes payload = detail::tagged_payload(next, spec.record_size);
      ++next;
      ucobs::send(*server, payload, high ? 0 : 1);
    }
  };
  server->set_on_acked(refill);
  sim.at(0, refill);

  ucobs::Receiver rx;
  auto* client = conn.client;
  client->set_on_readable([&] {
    while (auto unit = client->connection().read()) {
      for (const auto& d : rx.on_unit(*unit)) {
        auto& m = msgs.at(get_be64(d.payload.data()));
        if (!m.delivered) {
          m.delivered = sim.now();
          m.offset = d.offset;
        }
      }
    }
  });
  sim.run(3600 * kSecond);

  RunResult out;
  std::vector<double> high, low;
  for (std::size_t i = 0; i < msgs.size(); ++i) {
    const auto& m = msgs[i];
    ResultRow row{i, m.queued, m.delivered, m.offset, spec.mode_label(), m.high ? "high" : "low", 0.0};
    if (m.delivered) {
      row.value = static_cast<double>(*m.delivered - m.queued);
      (m.high ? high : low).push_back(row.value);
    }
    out.rows.push_back(std::move(row));
  }
  const double mh = median(high), ml = median(low);
  out.summary.push_back(detail::summary(spec, "delivered", static_cast<double>(high.size() + low.size())));
  out.summary.push_back(detail::summary(spec, "median_high_us", mh));
  out.summary.push_back(detail::summary(spec, "median_low_us", ml));
  out.summary.push_back(detail::summary(spec, "median_ratio", ml > 0 ? mh / ml : 0.0));
  out.summary.push_back(detail::summary(spec, "malformed", static_cast<double>(rx.stats().malformed)));
  return out;
}

}  // namespace minion::harness
