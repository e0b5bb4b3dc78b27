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
#include <charconv>
#include <cmath>
#include <string>

#include "minion/harness.hpp"

namespace minion::harness {

namespace {

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw Error(ErrorCode::Config, "bad value for " + std::string(key) + ": " + std::string(v));
  return out;
}

TimeUs ms_to_us(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const std::string s(v);
    const double ms = std::stod(s, &used);
    if (used != s.size() || !(ms >= 0)) throw std::invalid_argument("ms");
    return static_cast<TimeUs>(std::llround(ms * kMillisecond));
  } catch (const std::exception&) {
    throw Error(ErrorCode::Config, "bad value for " + std::string(key) + ": " + std::string(v));
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string ExperimentSpec::mode_label() const { return secure.empty() ? mode : secure; }

void ExperimentSpec::validate() const {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end())
    throw Error(ErrorCode::Config, "unknown experiment: " + name);
  if (mode != "tcp" && mode != "utcp" && !(mode == "udp" && name == "voip"))
    throw Error(ErrorCode::Config, "mode " + mode + " is not valid for " + name);
  if (!secure.empty()) {
    if (name != "fixed-rate" && name != "voip")
      throw Error(ErrorCode::Config, "--secure applies to fixed-rate and voip only");
    if ((secure == "tls" && mode != "tcp") || (secure == "utls" && mode != "utcp"))
      throw Error(ErrorCode::Config, "secure mode " + secure + " requires mode " +
                                         (secure == "tls" ? "tcp" : "utcp"));
    if (secure != "tls" && secure != "utls") throw Error(ErrorCode::Config, "unknown secure mode " + secure);
  }
  if (seeds == 0 || record_size == 0 || interval <= 0 || count == 0 || jitter_buffer <= 0 ||
      predict_window > 64 || bulk_bytes == 0 || pages == 0 || priority_every == 0 || backlog == 0)
    throw Error(ErrorCode::Config, "experiment parameters must be positive");
  if (!secure.empty() && record_size > (1u << 14))
    throw Error(ErrorCode::Config, "secure record size exceeds 16384");
  if (name == "priority" && record_size > 65536)
    throw Error(ErrorCode::Config, "priority message size exceeds 65536");
  sim.validate();
}

ExperimentSpec default_spec(const std::string& name) {
  ExperimentSpec s;
  s.name = name;
  auto& c = s.sim;
  if (name == "fixed-rate") {
    c.rtt_us = 100 * kMillisecond;
    c.loss_rate = 0.02;
    s.record_size = 1448;
    s.interval = 20 * kMillisecond;
    s.count = 1500;
  } else if (name == "bulk") {
    c.rtt_us = 60 * kMillisecond;
    c.loss_rate = 0.03;
  } else if (name == "priority") {
    c.rtt_us = 60 * kMillisecond;
    c.loss_rate = 0.005;
    s.record_size = 1400;
    s.count = 10000;
  } else if (name == "voip") {
    c.rtt_us = 60 * kMillisecond;
    c.bandwidth_down_bps = 3e6;
    c.bandwidth_up_bps = 3e6;
    c.loss_rate = 0.05;
    s.record_size = 640;  // 256 kbps in 20 ms frames
    s.interval = 20 * kMillisecond;
    s.count = 3000;
    s.competing = 4;
  } else if (name == "web") {
    c.rtt_us = 60 * kMillisecond;
    c.bandwidth_down_bps = 1.5e6;
    c.bandwidth_up_bps = 1.5e6;
    c.loss_rate = 0.0;
  } else if (name == "tunnel") {
    c.rtt_us = 60 * kMillisecond;
    c.bandwidth_down_bps = 3e6;
    c.bandwidth_up_bps = 0.5e6;
    c.loss_rate = 0.001;
    s.competing = 2;
    s.bulk_bytes = 3'000'000;
  } else {
    throw Error(ErrorCode::Config, "unknown experiment: " + name);
  }
  return s;
}

void apply_setting(ExperimentSpec& s, std::string_view key, std::string_view value) {
  if (key == "experiment") {
    s.name = std::string(value);
  } else if (key == "mode") {
    s.mode = std::string(value);
  } else if (key == "secure") {
    s.secure = std::string(value);
  } else if (key == "seeds") {
    s.seeds = to_u64(key, value);
  } else if (key == "record-size") {
    s.record_size = to_u64(key, value);
  } else if (key == "interval") {
    s.interval = ms_to_us(key, value);
  } else if (key == "count") {
    s.count = to_u64(key, value);
  } else if (key == "jitter-buffer") {
    s.jitter_buffer = ms_to_us(key, value);
  } else if (key == "competing") {
    s.competing = to_u64(key, value);
  } else if (key == "trace") {
    s.trace_file = std::string(value);
  } else if (key == "predict-window") {
    s.predict_window = to_u64(key, value);
  } else if (key == "bulk-bytes") {
    s.bulk_bytes = to_u64(key, value);
  } else if (key == "pages") {
    s.pages = to_u64(key, value);
  } else if (key == "priority-every") {
    s.priority_every = to_u64(key, value);
  } else if (key == "backlog") {
    s.backlog = to_u64(key, value);
  } else {
    netsim::apply_setting(s.sim, key, value);
  }
}

void apply_config(ExperimentSpec& s, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::Config, "config line " + std::to_string(line_no) + ": expected key=value");
    apply_setting(s, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

}  // namespace minion::harness
