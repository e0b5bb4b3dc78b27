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

// Experiment driver: builds a simulated path, runs one workload in one mode
// and reports per-item rows plus per-run summary metrics.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "minion/common.hpp"
#include "minion/netsim.hpp"

namespace minion::harness {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"bulk",  "fixed-rate", "priority",
                                                 "voip",  "web",        "tunnel"};
  return names;
}

struct ExperimentSpec {
  std::string name;
  std::string mode = "tcp";     // tcp | utcp | udp (voip only)
  std::string secure;           // "" | tls | utls (fixed-rate, voip)
  netsim::SimConfig sim;
  std::uint64_t seeds = 1;

  // Workload parameters.
  std::size_t record_size = 1448;
  TimeUs interval = 20 * kMillisecond;
  std::size_t count = 1500;
  TimeUs jitter_buffer = 200 * kMillisecond;
  std::size_t competing = 0;
  std::string trace_file;
  std::size_t predict_window = 3;
  std::size_t bulk_bytes = 2'000'000;
  std::size_t pages = 200;
  std::size_t priority_every = 100;
  std::size_t backlog = 64 * 1024;

  // Label used in file names: the secure mode when set, else the mode.
  std::string mode_label() const;
  bool unordered() const { return mode == "utcp"; }
  void validate() const;
};

// Spec with the experiment's standard path and workload parameters.
ExperimentSpec default_spec(const std::string& name);

// Applies one `key=value` setting (path or workload); throws Error(Config).
void apply_setting(ExperimentSpec& spec, std::string_view key, std::string_view value);
void apply_config(ExperimentSpec& spec, std::string_view key_value_text);

struct ResultRow {
  std::uint64_t id = 0;
  TimeUs send_us = 0;
  std::optional<TimeUs> deliver_us;
  std::uint64_t offset = 0;
  std::string mode;
  std::string label;
  double value = 0;
  bool operator==(const ResultRow&) const = default;
};

struct SummaryRow {
  std::string experiment;
  std::string mode;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0;
  bool operator==(const SummaryRow&) const = default;
};

struct RunResult {
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;

  // Summary value by metric name; throws if absent.
  double metric(const std::string& name) const;
};

// One simulation with spec.sim.seed.
RunResult run_once(const ExperimentSpec& spec);

RunResult run_fixed_rate(const ExperimentSpec& spec);
RunResult run_bulk(const ExperimentSpec& spec);
RunResult run_priority(const ExperimentSpec& spec);
RunResult run_voip(const ExperimentSpec& spec);
RunResult run_web(const ExperimentSpec& spec);
RunResult run_tunnel(const ExperimentSpec& spec);

// Runs seeds [seed, seed + seeds) and writes <name>-<mode>-<seed>.csv per run
// plus summary.csv into `out_dir`. Returns all summary rows.
std::vector<SummaryRow> run_experiment(const ExperimentSpec& spec,
                                       const std::filesystem::path& out_dir);

// CSV I/O.
inline constexpr const char* kRowHeader = "id,send_us,deliver_us,offset,mode,label,value";
inline constexpr const char* kSummaryHeader = "experiment,mode,seed,metric,value";
std::string format_double(double v);
void write_rows(std::ostream& out, const std::vector<ResultRow>& rows);
void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows);
std::vector<ResultRow> read_rows(std::istream& in);
std::vector<SummaryRow> read_summary(std::istream& in);
void emit_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
std::vector<ResultRow> load_csv(const std::filesystem::path& path);

// Metric helpers.
double percentile(std::vector<double> values, double p);  // nearest rank, p in [0,100]
double median(std::vector<double> values);
// Lengths of maximal runs of `true` in `missed`.
std::vector<std::size_t> burst_lengths(const std::vector<bool>& missed);

// Union of half-open ranges; reports newly covered bytes.
class IntervalSet {
 public:
  std::uint64_t add(std::uint64_t lo, std::uint64_t hi);
  bool covers(std::uint64_t lo, std::uint64_t hi) const;
  std::uint64_t total() const { return total_; }
  std::size_t size() const { return ranges_.size(); }

 private:
  std::map<std::uint64_t, std::uint64_t> ranges_;
  std::uint64_t total_ = 0;
};

// Web workload: one page per entry.
struct Page {
  std::size_t primary = 0;
  std::vector<std::size_t> secondaries;
};
std::vector<Page> synthetic_pages(std::size_t count, std::uint64_t seed);
// CSV lines "page,primary,secondaries" with secondaries separated by ';'.
std::vector<Page> load_pages(const std::filesystem::path& path);

}  // namespace minion::harness
