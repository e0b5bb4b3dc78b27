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

#include <deque>

#include "internal.hpp"
#include "minion/mstcp.hpp"
#include "minion/ucobs.hpp"

namespace minion::harness {

namespace {

constexpr std::size_t kRequestBytes = 64;

Bytes request(std::uint32_t page, std::uint32_t object) {
  Bytes r(kRequestBytes, std::uint8_t{'r'});
  put_be32(r.data(), page);
  put_be32(r.data() + 4, object);
  return r;
}

struct ObjectTiming {
  std::optional<TimeUs> first_byte;
  std::optional<TimeUs> done;
  std::size_t received = 0;
};

struct PageState {
  TimeUs start = 0;
  std::optional<TimeUs> end;
  std::vector<ObjectTiming> objects;
};

std::size_t object_size(const Page& p, std::size_t obj) {
  return obj == 0 ? p.primary : p.secondaries.at(obj - 1);
}

}  // namespace

// Pages load one after another. The client asks for the primary object, and
// once it is complete asks for every secondary at once. tcp mode pipelines
// the requests on one ordered stream and the server answers them in turn;
// utcp mode gives each object its own msTCP stream and the server
// interleaves chunks of all open responses.
RunResult run_web(const ExperimentSpec& spec) {
  const std::vector<Page> pages =
      spec.trace_file.empty() ? synthetic_pages(spec.pages, spec.sim.seed) : load_pages(spec.trace_file);
  detail::Path path(spec.sim);
  auto& sim = path.sim;
  const bool ms = spec.unordered();
  auto conn = path.connect(0, ms);
  auto* server = conn.server;
  auto* client = conn.client;

  std::vector<PageState> state(pages.size());
  std::size_t current = 0;
  std::function<void()> start_page;
  // Issues requests for the given objects of the current page in one write.
  std::function<void(const std::vector<std::uint32_t>&)> send_requests;

  // Client bookkeeping shared by both modes.
  auto on_object_bytes = [&](std::size_t obj, std::size_t n) {
    auto& ps = state[current];
    auto& o = ps.objects.at(obj);
    if (!o.first_byte) o.first_byte = sim.now();
    o.received += n;
    if (o.done || o.received < object_size(pages[current], obj)) return;
    o.done = sim.now();
    if (obj == 0 && ps.objects.size() > 1) {
      std::vector<std::uint32_t> rest;
      for (std::uint32_t k = 1; k < ps.objects.size(); ++k) rest.push_back(k);
      send_requests(rest);
    }
    for (const auto& x : ps.objects) {
      if (!x.done) return;
    }
    ps.end = sim.now();
    ++current;
    if (current < pages.size()) start_page();
  };

  start_page = [&] {
    auto& ps = state[current];
    ps.start = sim.now();
    ps.objects.assign(1 + pages[current].secondaries.size(), ObjectTiming{});
    send_requests({0});
  };

  std::function<void()> serve;
  std::uint64_t chunks = 0;

  if (!ms) {
    struct Expected {
      std::size_t obj;
      std::size_t remaining;
    };
    auto expected = std::make_shared<std::deque<Expected>>();
    send_requests = [&, expected](const std::vector<std::uint32_t>& objs) {
      Bytes batch;
      for (auto obj : objs) {
        expected->push_back({obj, object_size(pages[current], obj)});
        const Bytes r = request(static_cast<std::uint32_t>(current), obj);
        batch.insert(batch.end(), r.begin(), r.end());
      }
      client->write(batch);
    };
    auto pending = std::make_shared<Bytes>();
    server->set_on_readable([&, pending] {
      while (auto unit = server->connection().read()) {
        pending->insert(pending->end(), unit->data.begin(), unit->data.end());
        std::size_t used = 0;
        for (; pending->size() - used >= kRequestBytes; used += kRequestBytes) {
          const auto page = get_be32(pending->data() + used);
          const auto obj = get_be32(pending->data() + used + 4);
          server->write(Bytes(object_size(pages.at(page), obj), std::uint8_t{'o'}));
        }
        pending->erase(pending->begin(), pending->begin() + static_cast<std::ptrdiff_t>(used));
      }
    });
    client->set_on_readable([&, expected] {
      while (auto unit = client->connection().read()) {
        std::size_t left = unit->data.size();
        while (left) {
          auto& e = expected->front();
          const std::size_t n = std::min(left, e.remaining);
          e.remaining -= n;
          left -= n;
          const std::size_t obj = e.obj;
          if (e.remaining == 0) expected->pop_front();
          on_object_bytes(obj, n);
        }
      }
    });
  } else {
    struct Job {
      std::uint16_t stream;
      std::size_t remaining;
    };
    auto jobs = std::make_shared<std::deque<Job>>();
    auto client_tx = std::make_shared<mstcp::Sender>();
    auto server_tx = std::make_shared<mstcp::Sender>();
    auto client_rx = std::make_shared<mstcp::Receiver>();
    auto server_rx = std::make_shared<mstcp::Receiver>();
    auto client_frames = std::make_shared<ucobs::Receiver>();
    auto server_frames = std::make_shared<ucobs::Receiver>();
    const std::size_t low_water = 4 * server->connection().config().mss;

    send_requests = [&, client_tx](const std::vector<std::uint32_t>& objs) {
      for (auto obj : objs) client_tx->outstanding(static_cast<std::uint16_t>(obj), &client->connection());
      Bytes batch;
      for (auto obj : objs) {
        const auto chunks =
            client_tx->next_message(static_cast<std::uint16_t>(obj), request(static_cast<std::uint32_t>(current), obj));
        for (const auto& c : chunks) {
          const Bytes f = ucobs::frame(c);
          batch.insert(batch.end(), f.begin(), f.end());
        }
      }
      const auto id = client->write(batch);
      for (auto obj : objs) client_tx->track(static_cast<std::uint16_t>(obj), id);
    };
    // Round-robin over open responses, one chunk-sized message at a time,
    // keeping only a little data unsent so new responses join quickly.
    serve = [&, jobs, server_tx, low_water] {
      while (!jobs->empty() && server->connection().unsent_bytes() < low_water) {
        Job j = jobs->front();
        jobs->pop_front();
        const std::size_t piece = std::min(j.remaining, server_tx->chunk_payload());
        server_tx->sendmsg(*server, j.stream, Bytes(piece, std::uint8_t{'o'}));
        ++chunks;
        j.remaining -= piece;
        if (j.remaining) jobs->push_back(j);
      }
    };
    server->set_on_acked([&] { serve(); });
    server->set_on_readable([&, jobs, server_rx, server_frames] {
      while (auto unit = server->connection().read()) {
        for (const auto& d : server_frames->on_unit(*unit)) {
          for (const auto& m : server_rx->on_datagram(d.payload)) {
            const auto page = get_be32(m.data.data());
            const auto obj = get_be32(m.data.data() + 4);
            jobs->push_back({static_cast<std::uint16_t>(obj), object_size(pages.at(page), obj)});
          }
        }
      }
      serve();
    });
    client->set_on_readable([&, client_rx, client_frames] {
      while (auto unit = client->connection().read()) {
        for (const auto& d : client_frames->on_unit(*unit)) {
          for (const auto& m : client_rx->on_datagram(d.payload)) on_object_bytes(m.stream_id, m.data.size());
        }
      }
    });
  }

  if (!pages.empty()) sim.at(0, [&] { start_page(); });
  sim.run(36000 * kSecond);

  RunResult out;
  std::vector<double> totals, first;
  std::size_t complete = 0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const auto& ps = state[i];
    const std::size_t n = pages[i].secondaries.size() + 1;
    double fb = 0;
    for (const auto& o : ps.objects) {
      if (o.first_byte) fb += static_cast<double>(*o.first_byte - ps.start);
    }
    fb = ps.objects.empty() ? 0.0 : fb / static_cast<double>(ps.objects.size());
    ResultRow page{i, ps.start, ps.end, n, spec.mode_label(), "page", 0.0};
    if (ps.end) {
      ++complete;
      page.value = static_cast<double>(*ps.end - ps.start);
      totals.push_back(page.value);
      first.push_back(fb);
    }
    out.rows.push_back(std::move(page));
    out.rows.push_back(ResultRow{i, ps.start, ps.end, n, spec.mode_label(), "first_byte", fb});
  }
  double sum = 0, fsum = 0;
  for (double t : totals) sum += t;
  for (double t : first) fsum += t;
  const double np = totals.empty() ? 1.0 : static_cast<double>(totals.size());
  out.summary.push_back(detail::summary(spec, "pages", static_cast<double>(pages.size())));
  out.summary.push_back(detail::summary(spec, "pages_complete", static_cast<double>(complete)));
  out.summary.push_back(detail::summary(spec, "total_page_time_us", sum));
  out.summary.push_back(detail::summary(spec, "mean_page_time_us", sum / np));
  out.summary.push_back(detail::summary(spec, "mean_first_byte_us", fsum / np));
  if (ms) out.summary.push_back(detail::summary(spec, "chunks", static_cast<double>(chunks)));
  return out;
}

}  // namespace minion::harness
