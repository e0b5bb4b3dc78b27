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

namespace minion::harness {

namespace {

struct Gap {
  TimeUs from = 0;
  TimeUs to = 0;
};

}  // namespace

// One large transfer; the receiver logs unique application bytes after every
// read that adds some.
RunResult run_bulk(const ExperimentSpec& spec) {
  detail::Path path(spec.sim);
  auto conn = path.connect(0, spec.unordered());
  auto& sim = path.sim;

  Bytes data(spec.bulk_bytes);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::uint8_t>(i * 31 + 5);
  sim.at(0, [host = conn.server, &data] { host->write(data); });

  IntervalSet got;
  struct Progress {
    TimeUs t;
    std::uint64_t bytes;
  };
  std::vector<Progress> progress;
  auto* client = conn.client;
  client->set_on_readable([&] {
    std::uint64_t added = 0;
    while (auto unit = client->connection().read()) added += got.add(unit->offset, unit->offset + unit->data.size());
    if (added) progress.push_back({sim.now(), got.total()});
  });
  sim.run(600 * kSecond);

  // Flat intervals of the progress curve, from the first delivery on.
  std::vector<Gap> gaps;
  for (std::size_t i = 1; i < progress.size(); ++i) gaps.push_back({progress[i - 1].t, progress[i].t});
  TimeUs longest = 0;
  for (const auto& g : gaps) longest = std::max(longest, g.to - g.from);

  // First-transmission data drops with no other data drop within two RTTs.
  const TimeUs rtt = spec.sim.rtt_us;
  std::vector<TimeUs> drops;
  for (const auto& e : sim.trace().events()) {
    if (e.kind == netsim::TraceKind::Drop && e.flow == 0 && e.endpoint == netsim::Side::Server && e.len > 0)
      drops.push_back(e.time);
  }
  std::vector<TimeUs> isolated;
  std::size_t covered = 0;
  for (const auto& e : sim.trace().events()) {
    if (e.kind != netsim::TraceKind::Drop || e.endpoint != netsim::Side::Server || e.len == 0 ||
        (e.flags & netsim::seg_flags::kRetransmit))
      continue;
    const bool alone = std::none_of(drops.begin(), drops.end(), [&](TimeUs t) {
      return t != e.time && t > e.time - 2 * rtt && t < e.time + 2 * rtt;
    });
    if (!alone) continue;
    isolated.push_back(e.time);
    const bool flat = std::any_of(gaps.begin(), gaps.end(), [&](const Gap& g) {
      return g.to - g.from >= rtt && g.from <= e.time + rtt && g.to > e.time;
    });
    if (flat) ++covered;
  }

  RunResult out;
  for (std::size_t i = 0; i < progress.size(); ++i) {
    out.rows.push_back(ResultRow{i, 0, progress[i].t, progress[i].bytes, spec.mode_label(), "progress",
                                 static_cast<double>(progress[i].bytes)});
  }
  for (std::size_t i = 0; i < isolated.size(); ++i) {
    out.rows.push_back(ResultRow{i, isolated[i], std::nullopt, 0, spec.mode_label(), "isolated_loss", 0.0});
  }
  const TimeUs done = progress.empty() ? 0 : progress.back().t;
  out.summary.push_back(detail::summary(spec, "bytes_delivered", static_cast<double>(got.total())));
  out.summary.push_back(detail::summary(spec, "completion_us", static_cast<double>(done)));
  out.summary.push_back(detail::summary(spec, "longest_flat_us", static_cast<double>(longest)));
  out.summary.push_back(detail::summary(spec, "isolated_losses", static_cast<double>(isolated.size())));
  out.summary.push_back(detail::summary(spec, "isolated_losses_with_flat", static_cast<double>(covered)));
  return out;
}

}  // namespace minion::harness
