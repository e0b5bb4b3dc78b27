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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "minion/minion.h"

namespace {

int report(minion_status s) {
  std::cerr << "minion-lab: " << minion_status_string(s);
  if (*minion_last_error()) std::cerr << ": " << minion_last_error();
  std::cerr << '\n';
  return 1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CLI::ValidationError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Run unordered-transport experiments on a simulated path"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run an experiment and write CSV results");
  std::string experiment, out_dir = "results", config;
  // Settings in the order given; flags override the config file.
  std::vector<std::pair<std::string, std::string>> settings;
  run->add_option("experiment", experiment, "bulk | fixed-rate | priority | voip | web | tunnel")->required();
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();
  run->add_option("--config", config, "key=value file applied before the flags");
  struct Flag {
    const char* name;
    const char* key;
    const char* help;
  };
  const Flag flags[] = {
      {"--mode", "mode", "tcp | utcp (voip also: udp)"},
      {"--secure", "secure", "tls | utls"},
      {"--rtt", "rtt", "Round-trip time in ms"},
      {"--loss", "loss", "Per-transmission loss probability"},
      {"--bw-down", "bw-down", "Downstream bandwidth in bit/s"},
      {"--bw-up", "bw-up", "Upstream bandwidth in bit/s"},
      {"--seed", "seed", "First seed"},
      {"--seeds", "seeds", "Number of consecutive seeds"},
      {"--jitter-buffer", "jitter-buffer", "Playout deadline in ms"},
      {"--competing", "competing", "Competing bulk flows"},
      {"--record-size", "record-size", "Record or message size in bytes"},
      {"--interval", "interval", "Record interval in ms"},
      {"--count", "count", "Number of records or messages"},
      {"--trace", "trace", "Web page trace (page,primary,secondaries)"},
      {"--mtu", "mtu", "Enable a re-segmenting middlebox with this MTU"},
      {"--predict-window", "predict-window", "Record-number prediction half width"},
      {"--bulk-bytes", "bulk-bytes", "Bulk transfer size"},
      {"--pages", "pages", "Synthetic web pages"},
  };
  std::map<std::string, std::string> values;
  for (const auto& f : flags) run->add_option(f.name, values[f.key], f.help);

  // trace
  auto* trace = app.add_subcommand("trace", "Run a scripted workload and dump the wire trace");
  std::string workload, trace_out = "trace.csv";
  double until_ms = 10000;
  bool unordered = false;
  trace->add_option("--workload", workload, "Workload file: time_ms endpoint bytes [tag [flags [flow]]]")
      ->required()
      ->check(CLI::ExistingFile);
  trace->add_option("--config", config, "key=value path settings")->check(CLI::ExistingFile);
  trace->add_option("--until", until_ms, "Stop time in ms")->capture_default_str();
  trace->add_option("--out", trace_out, "Trace CSV path")->capture_default_str();
  trace->add_flag("--unordered", unordered, "Enable unordered receive and send");

  CLI11_PARSE(app, argc, argv);

  if (*trace) {
    const std::string cfg = config.empty() ? std::string() : slurp(config);
    const std::string wl = slurp(workload);
    auto s = minion_trace_run(cfg.empty() ? nullptr : cfg.c_str(), wl.c_str(), static_cast<int64_t>(until_ms),
                              unordered, unordered, trace_out.c_str());
    return s == MINION_OK ? 0 : report(s);
  }

  minion_experiment* e = nullptr;
  auto s = minion_experiment_create(experiment.c_str(), &e);
  if (s != MINION_OK) return report(s);
  if (!config.empty()) s = minion_experiment_load_config(e, config.c_str());
  for (const auto& f : flags) {
    if (s != MINION_OK) break;
    if (run->count(f.name)) s = minion_experiment_set(e, f.key, values[f.key].c_str());
  }
  if (s == MINION_OK) s = minion_experiment_run(e, out_dir.c_str());
  if (s != MINION_OK) {
    minion_experiment_destroy(e);
    return report(s);
  }
  const size_t n = minion_experiment_summary_count(e);
  for (size_t i = 0; i < n; ++i) {
    const char* mode = nullptr;
    const char* metric = nullptr;
    uint64_t seed = 0;
    double value = 0;
    minion_experiment_summary_row(e, i, &mode, &seed, &metric, &value);
    std::printf("%s\t%s\t%llu\t%s\t%.6g\n", experiment.c_str(), mode, static_cast<unsigned long long>(seed), metric,
                value);
  }
  minion_experiment_destroy(e);
  return 0;
}
