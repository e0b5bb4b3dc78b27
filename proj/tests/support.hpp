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

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "minion/common.hpp"

namespace minion::test {

// Whitespace-separated fields of every non-comment line of a vector file.
inline std::vector<std::vector<std::string>> load_vectors(const std::string& name) {
  std::ifstream in(std::string(MINION_TEST_DATA_DIR) + "/" + name);
  if (!in) throw std::runtime_error("missing vector file " + name);
  std::vector<std::vector<std::string>> out;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::vector<std::string> f;
    for (std::string tok; fields >> tok;) f.push_back(tok);
    out.push_back(std::move(f));
  }
  return out;
}

// '-' stands for an empty byte string.
inline Bytes hex_field(const std::string& s) { return s == "-" ? Bytes{} : from_hex(s); }

inline Bytes pattern(std::size_t n, std::uint8_t seed = 1) {
  Bytes b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>(seed + i * 13);
  return b;
}

}  // namespace minion::test
