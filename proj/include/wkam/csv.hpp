// Copyright 2026 The wkam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wkam/errors.hpp"
#include "wkam/particle_array.hpp"

namespace wkam::csv {

/// Shortest representation that round-trips.
inline std::string format(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw InvalidInput("cannot parse number '" + s + "'");
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (!have_header) {
      t.header = split(s);
      have_header = true;
      continue;
    }
    std::vector<double> row;
    for (const auto& f : split(s)) row.push_back(parse_double(f));
    if (row.size() != t.header.size())
      throw InvalidInput(path.string() + ": row width does not match header");
    t.rows.push_back(std::move(row));
  }
  if (!have_header) throw InvalidInput(path.string() + ": empty csv");
  return t;
}

inline void write_row(std::ostream& os, const std::vector<double>& row) {
  for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << format(row[k]);
  os << '\n';
}

inline void write_header(std::ostream& os, const std::vector<std::string>& header) {
  for (std::size_t k = 0; k < header.size(); ++k) os << (k ? "," : "") << header[k];
  os << '\n';
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

/// Configuration CSV: one row per particle, header x0,...,x{d-1}.
inline void write_configuration(std::ostream& os, const Configuration& cfg) {
  std::vector<std::string> header;
  for (std::size_t j = 0; j < cfg.dim(); ++j) header.push_back("x" + std::to_string(j));
  write_header(os, header);
  for (std::size_t i = 0; i < cfg.n_particles(); ++i) {
    auto r = cfg.row(i);
    write_row(os, std::vector<double>(r.begin(), r.end()));
  }
}

inline Configuration read_configuration(const std::filesystem::path& path) {
  Table t = read_table(path);
  const std::size_t d = t.header.size();
  for (std::size_t j = 0; j < d; ++j)
    if (t.header[j] != "x" + std::to_string(j))
      throw InvalidInput(path.string() + ": expected header x0,...,x{d-1}");
  if (t.rows.empty()) throw InvalidInput(path.string() + ": no particles");
  std::vector<double> values;
  for (const auto& r : t.rows) values.insert(values.end(), r.begin(), r.end());
  return Configuration(t.rows.size(), d, std::move(values));
}

}  // namespace wkam::csv
