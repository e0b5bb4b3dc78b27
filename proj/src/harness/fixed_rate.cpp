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
#include <limits>

#include "internal.hpp"
#include "minion/utls.hpp"

namespace minion::harness {

// A sender writes one record every `interval`; the receiver timestamps each
// record once all of its bytes have been handed up.
RunResult run_fixed_rate(const ExperimentSpec& spec) {
  detail::Path path(spec.sim);
  auto conn = path.connect(0, spec.unordered());
  auto& sim = path.sim;
  const bool secure = !spec.secure.empty();

  struct Record {
    TimeUs sent = 0;
    std::uint64_t offset = 0;
    std::uint64_t end = 0;
    std::optional<TimeUs> delivered;
    bool after_hole = false;  // completed at the transport while earlier bytes were missing
    bool out_of_order = false;
  };
  std::vector<Record> records(spec.count);
  std::uint64_t stream = 0;

  std::optional<utls::Sealer> sealer;
  std::optional<utls::Receiver> opener;
  if (secure) {
    const auto keys = detail::session_keys(spec.sim.seed);
    sealer.emplace(keys, derive_seed(spec.sim.seed, "iv"));
    utls::ReceiverOptions opts;
    opts.unordered = spec.secure == "utls";
    opts.half_width = spec.predict_window;
    opener.emplace(keys, opts);
  }

  for (std::size_t i = 0; i < spec.count; ++i) {
    const Bytes payload = detail::tagged_payload(i, spec.record_size);
    Bytes wire = secure ? sealer->seal(payload) : payload;
    records[i].sent = static_cast<TimeUs>(i) * spec.interval;
    records[i].offset = stream;
    records[i].end = stream + wire.size();
    stream += wire.size();
    sim.at(records[i].sent, [host = conn.server, wire = std::move(wire)] { host->write(wire); });
  }

  IntervalSet covered;
  std::vector<bool> complete(records.size(), false);
  auto* client = conn.client;
  client->set_on_readable([&] {
    while (auto unit = client->connection().read()) {
      const std::uint64_t lo = unit->offset;
      const std::uint64_t hi = lo + unit->data.size();
      if (covered.add(lo, hi) != 0) {
        // Records touching [lo, hi) may have just been completed.
        auto first = std::upper_bound(records.begin(), records.end(), lo,
                                      [](std::uint64_t v, const Record& r) { return v < r.end; });
        for (auto it = first; it != records.end() && it->offset < hi; ++it) {
          const auto i = static_cast<std::size_t>(it - records.begin());
          if (complete[i] || !covered.covers(it->offset, it->end)) continue;
          complete[i] = true;
          it->after_hole = it->offset > 0 && !covered.covers(0, it->offset);
          if (!secure && !it->delivered) it->delivered = sim.now();
        }
      }
      if (!secure) continue;
      for (const auto& r : opener->on_unit(*unit)) {
        auto& rec = records.at(r.record_number);
        if (rec.delivered) continue;
        rec.delivered = sim.now();
        rec.out_of_order = r.out_of_order;
      }
    }
  });

  const TimeUs last_write = spec.count ? records.back().sent : 0;
  sim.run(last_write + 600 * kSecond);

  RunResult out;
  std::vector<double> lat;
  TimeUs min_lat = std::numeric_limits<TimeUs>::max();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    ResultRow row{i, r.sent, r.delivered, r.offset, spec.mode_label(), "record", 0.0};
    if (r.delivered) {
      const TimeUs l = *r.delivered - r.sent;
      row.value = static_cast<double>(l);
      lat.push_back(row.value);
      min_lat = std::min(min_lat, l);
    }
    out.rows.push_back(std::move(row));
  }
  std::size_t delayed = 0;
  for (double l : lat) {
    if (l >= static_cast<double>(min_lat + spec.sim.rtt_us)) ++delayed;
  }
  const double n = lat.empty() ? 1.0 : static_cast<double>(lat.size());
  out.summary.push_back(detail::summary(spec, "records", static_cast<double>(records.size())));
  out.summary.push_back(detail::summary(spec, "delivered", static_cast<double>(lat.size())));
  out.summary.push_back(detail::summary(spec, "delayed_fraction", static_cast<double>(delayed) / n));
  out.summary.push_back(detail::summary(spec, "latency_min_us", lat.empty() ? 0.0 : static_cast<double>(min_lat)));
  out.summary.push_back(detail::summary(spec, "latency_median_us", median(lat)));
  out.summary.push_back(detail::summary(spec, "latency_p90_us", percentile(lat, 90)));
  if (secure) {
    std::size_t after_hole = 0, after_hole_ooo = 0;
    for (const auto& r : records) {
      if (!r.after_hole) continue;
      ++after_hole;
      if (r.out_of_order) ++after_hole_ooo;
    }
    out.summary.push_back(detail::summary(spec, "out_of_order_records",
                                          static_cast<double>(opener->stats().out_of_order)));
    out.summary.push_back(detail::summary(spec, "after_hole_records", static_cast<double>(after_hole)));
    out.summary.push_back(detail::summary(
        spec, "after_hole_out_of_order_fraction",
        after_hole ? static_cast<double>(after_hole_ooo) / static_cast<double>(after_hole) : 0.0));
  }
  return out;
}

}  // namespace minion::harness
