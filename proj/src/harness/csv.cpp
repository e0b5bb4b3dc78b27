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

#include <charconv>
#include <fstream>
#include <sstream>

#include "minion/harness.hpp"

namespace minion::harness {

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error(ErrorCode::InvalidArgument, "unformattable number");
  return std::string(buf, p);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

template <typename T>
T parse_num(const std::string& s, std::size_t line_no) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw Error(ErrorCode::Malformed, "csv line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

void check_text(const std::string& s) {
  if (s.find_first_of(",\n\r") != std::string::npos)
    throw Error(ErrorCode::InvalidArgument, "csv field contains a separator: " + s);
}

}  // namespace

void write_rows(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kRowHeader << '\n';
  for (const auto& r : rows) {
    check_text(r.mode);
    check_text(r.label);
    out << r.id << ',' << r.send_us << ',';
    if (r.deliver_us) out << *r.deliver_us;
    out << ',' << r.offset << ',' << r.mode << ',' << r.label << ',' << format_double(r.value) << '\n';
  }
}

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    check_text(r.experiment);
    check_text(r.mode);
    check_text(r.metric);
    out << r.experiment << ',' << r.mode << ',' << r.seed << ',' << r.metric << ','
        << format_double(r.value) << '\n';
  }
}

std::vector<ResultRow> read_rows(std::istream& in) {
  std::vector<ResultRow> rows;
  std::string line;
  if (!std::getline(in, line) || split(line) != split(kRowHeader))
    throw Error(ErrorCode::Malformed, "missing result header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != 7) throw Error(ErrorCode::Malformed, "csv line " + std::to_string(line_no) + ": expected 7 fields");
    ResultRow r;
    r.id = parse_num<std::uint64_t>(f[0], line_no);
    r.send_us = parse_num<TimeUs>(f[1], line_no);
    if (!f[2].empty()) r.deliver_us = parse_num<TimeUs>(f[2], line_no);
    r.offset = parse_num<std::uint64_t>(f[3], line_no);
    r.mode = f[4];
    r.label = f[5];
    r.value = parse_num<double>(f[6], line_no);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<SummaryRow> read_summary(std::istream& in) {
  std::vector<SummaryRow> rows;
  std::string line;
  if (!std::getline(in, line) || split(line) != split(kSummaryHeader))
    throw Error(ErrorCode::Malformed, "missing summary header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != 5) throw Error(ErrorCode::Malformed, "csv line " + std::to_string(line_no) + ": expected 5 fields");
    rows.push_back(SummaryRow{f[0], f[1], parse_num<std::uint64_t>(f[2], line_no), f[3],
                              parse_num<double>(f[4], line_no)});
  }
  return rows;
}

void emit_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_rows(out, rows);
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write to " + path.string() + " failed");
}

std::vector<ResultRow> load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_rows(in);
}

}  // namespace minion::harness
