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

#include <fstream>

#include "minion/harness.hpp"

namespace minion::harness {

RunResult run_once(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.name == "fixed-rate") return run_fixed_rate(spec);
  if (spec.name == "bulk") return run_bulk(spec);
  if (spec.name == "priority") return run_priority(spec);
  if (spec.name == "voip") return run_voip(spec);
  if (spec.name == "web") return run_web(spec);
  return run_tunnel(spec);
}

std::vector<SummaryRow> run_experiment(const ExperimentSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<SummaryRow> all;
  for (std::uint64_t k = 0; k < spec.seeds; ++k) {
    ExperimentSpec one = spec;
    one.sim.seed = spec.sim.seed + k;
    auto result = run_once(one);
    emit_csv(result.rows, out_dir / (spec.name + "-" + spec.mode_label() + "-" + std::to_string(one.sim.seed) + ".csv"));
    all.insert(all.end(), result.summary.begin(), result.summary.end());
  }
  const auto path = out_dir / "summary.csv";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_summary(out, all);
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write to " + path.string() + " failed");
  return all;
}

}  // namespace minion::harness
