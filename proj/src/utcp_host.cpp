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

#include "minion/utcp.hpp"

namespace minion::utcp {

Host::Host(netsim::Simulator& sim, netsim::SegmentOutlet& outlet, ConnectionConfig config)
    : sim_(sim), outlet_(outlet), conn_(config), alive_(std::make_shared<bool>(true)) {}

Host::~Host() { *alive_ = false; }

WriteId Host::write(ByteView data, std::uint8_t flags, std::uint32_t tag) {
  WriteId id = conn_.write(data, flags, tag);
  pump();
  return id;
}

void Host::pump() {
  for (auto& seg : conn_.dequeue_for_transmit(sim_.now())) outlet_.send(std::move(seg));
  arm_timer();
}

void Host::deliver(Segment segment) {
  const bool has_ack = (segment.flags & netsim::seg_flags::kAck) != 0;
  auto result = conn_.on_segment(segment, sim_.now());
  if (result.ack) outlet_.send(std::move(*result.ack));
  pump();
  if (has_ack && on_acked_) on_acked_();
  if (!result.delivered.empty() && on_readable_) {
    on_readable_();
    if (auto update = conn_.window_update()) outlet_.send(std::move(*update));
  }
  arm_timer();
}

void Host::arm_timer() {
  auto deadline = conn_.timer_deadline();
  if (!deadline) return;
  // An earlier wakeup re-checks the deadline when it fires.
  if (scheduled_ && *scheduled_ <= *deadline) return;
  const TimeUs when = *deadline;
  scheduled_ = when;
  sim_.at(when, [this, alive = alive_, when] {
    if (!*alive || scheduled_ != when) return;
    scheduled_.reset();
    if (conn_.on_timer(sim_.now())) {
      sim_.trace().record_timeout(sim_.now(), conn_.config().side, conn_.config().flow,
                                  conn_.config().isn_local +
                                      static_cast<std::uint32_t>(conn_.acked_bytes()));
      pump();
    }
    arm_timer();
  });
}

}  // namespace minion::utcp
