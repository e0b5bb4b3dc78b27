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
#include <cmath>
#include <fstream>
#include <sstream>

#include "minion/harness.hpp"

namespace minion::harness {

double RunResult::metric(const std::string& name) const {
  for (const auto& s : summary) {
    if (s.metric == name) return s.value;
  }
  throw Error(ErrorCode::InvalidArgument, "no metric " + name);
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(p / 100.0 * static_cast<double>(values.size()));
  const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(values.size())));
  return values[idx - 1];
}

double median(std::vector<double> values) { return percentile(std::move(values), 50.0); }

std::vector<std::size_t> burst_lengths(const std::vector<bool>& missed) {
  std::vector<std::size_t> out;
  std::size_t run = 0;
  for (bool m : missed) {
    if (m) {
      ++run;
    } else if (run) {
      out.push_back(run);
      run = 0;
    }
  }
  if (run) out.push_back(run);
  return out;
}

std::uint64_t IntervalSet::add(std::uint64_t lo, std::uint64_t hi) {
  if (lo >= hi) return 0;
  std::uint64_t added = hi - lo;
  auto it = ranges_.upper_bound(lo);
  if (it != ranges_.begin() && std::prev(it)->second >= lo) --it;
  std::uint64_t new_lo = lo, new_hi = hi;
  while (it != ranges_.end() && it->first <= hi) {
    const std::uint64_t olo = std::max(lo, it->first);
    const std::uint64_t ohi = std::min(hi, it->second);
    if (olo < ohi) added -= ohi - olo;
    new_lo = std::min(new_lo, it->first);
    new_hi = std::max(new_hi, it->second);
    it = ranges_.erase(it);
  }
  ranges_.emplace(new_lo, new_hi);
  total_ += added;
  return added;
}

bool IntervalSet::covers(std::uint64_t lo, std::uint64_t hi) const {
  if (lo >= hi) return true;
  auto it = ranges_.upper_bound(lo);
  if (it == ranges_.begin()) return false;
  --it;
  return it->first <= lo && hi <= it->second;
}

std::vector<Page> synthetic_pages(std::size_t count, std::uint64_t seed) {
  // Log-normal object sizes; about one page in six has no embedded objects.
  SplitMix64 rng(derive_seed(seed, "web-pages"));
  auto normal = [&] {
    const double u1 = std::max(rng.uniform(), 1e-12);
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  };
  auto lognormal = [&](double median_bytes, double sigma, std::size_t lo, std::size_t hi) {
    const double v = median_bytes * std::exp(sigma * normal());
    return std::clamp(static_cast<std::size_t>(v), lo, hi);
  };
  std::vector<Page> pages(count);
  for (auto& p : pages) {
    p.primary = lognormal(10000, 0.9, 300, 200000);
    const std::size_t n = rng.below(6) == 0 ? 0 : 2 + rng.below(11);
    for (std::size_t i = 0; i < n; ++i) p.secondaries.push_back(lognormal(6000, 1.0, 100, 200000));
  }
  return pages;
}

std::vector<Page> load_pages(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open trace " + path.string());
  std::vector<Page> pages;
  std::string line;
  std::size_t line_no = 0;
  auto num = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      auto v = std::stoull(s, &used);
      if (used != s.size() || v == 0) throw std::invalid_argument("size");
      return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      throw Error(ErrorCode::Malformed,
                  "trace line " + std::to_string(line_no) + ": bad size '" + s + "'");
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#' || line.rfind("page,", 0) == 0) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string tok; std::getline(ss, tok, ',');) f.push_back(tok);
    if (f.size() < 2 || f.size() > 3)
      throw Error(ErrorCode::Malformed, "trace line " + std::to_string(line_no) + ": expected page,primary,secondaries");
    Page p;
    p.primary = num(f[1]);
    if (f.size() == 3 && !f[2].empty()) {
      std::stringstream s2(f[2]);
      for (std::string tok; std::getline(s2, tok, ';');) p.secondaries.push_back(num(tok));
    }
    pages.push_back(std::move(p));
  }
  return pages;
}

}  // namespace minion::harness
