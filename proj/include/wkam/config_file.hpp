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

// Flat run-configuration files:
//
//   # comment
//   mode = cell
//   c = 0.5            (comma-separated for d > 1)
//   V = cosine         (preset: free | cosine) or a [potential.V] section
//   model = other.cfg  (potentials, dim and c read from another file)
//
//   [potential.V]
//   # k_1, ..., k_d, a, b   ->  a cos(2 pi k.x) + b sin(2 pi k.x)
//   0, -1, 0
//   1, 1, 0

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wkam/csv.hpp"
#include "wkam/errors.hpp"
#include "wkam/model.hpp"
#include "wkam/trig_potential.hpp"

namespace wkam::config {

struct RawConfig {
  std::map<std::string, std::string> values;
  std::map<std::string, std::vector<std::vector<double>>> sections;
  std::filesystem::path base_dir;
};

inline RawConfig parse_text(std::istream& in, const std::string& source) {
  RawConfig cfg;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = csv::trim(line);
    if (t.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    if (t.front() == '[') {
      if (t.back() != ']') throw InvalidInput(where + ": malformed section header");
      section = csv::trim(std::string_view(t).substr(1, t.size() - 2));
      if (section != "potential.V" && section != "potential.W")
        throw InvalidInput(where + ": unknown section [" + section + "]");
      if (cfg.sections.count(section)) throw InvalidInput(where + ": duplicate section");
      cfg.sections[section];
      continue;
    }
    if (!section.empty()) {
      std::vector<double> row;
      for (const auto& tok : csv::split(t)) row.push_back(csv::parse_double(tok));
      cfg.sections[section].push_back(std::move(row));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw InvalidInput(where + ": expected key = value");
    const std::string key = csv::trim(std::string_view(t).substr(0, eq));
    const std::string val = csv::trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw InvalidInput(where + ": empty key");
    if (cfg.values.count(key)) throw InvalidInput(where + ": duplicate key '" + key + "'");
    cfg.values[key] = val;
  }
  return cfg;
}

inline RawConfig parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  RawConfig cfg = parse_text(in, path.string());
  cfg.base_dir = path.parent_path();
  return cfg;
}

/// Typed access with "missing" and "malformed" diagnostics.
class Params {
 public:
  explicit Params(RawConfig raw) : raw_(std::move(raw)) {}

  const RawConfig& raw() const noexcept { return raw_; }
  bool has(const std::string& key) const { return raw_.values.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback) const {
    const auto it = raw_.values.find(key);
    return it == raw_.values.end() ? fallback : it->second;
  }

  std::string str(const std::string& key) const {
    const auto it = raw_.values.find(key);
    if (it == raw_.values.end()) throw InvalidInput("config: missing key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key, std::optional<double> fallback = std::nullopt) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw InvalidInput("config: missing key '" + key + "'");
    }
    try {
      const double v = csv::parse_double(str(key));
      if (!std::isfinite(v)) throw InvalidInput("non-finite");
      return v;
    } catch (const InvalidInput&) {
      throw InvalidInput("config: key '" + key + "' is not a finite number");
    }
  }

  double positive(const std::string& key, std::optional<double> fallback = std::nullopt) const {
    const double v = real(key, fallback);
    if (!(v > 0.0)) throw InvalidInput("config: '" + key + "' must be positive");
    return v;
  }

  std::size_t count(const std::string& key, std::optional<std::size_t> fallback = std::nullopt,
                    std::size_t minimum = 1) const {
    const double v = has(key) ? real(key) : fallback ? static_cast<double>(*fallback) : real(key);
    if (v != std::floor(v) || v < static_cast<double>(minimum) || v > 1e12)
      throw InvalidInput("config: '" + key + "' must be an integer >= " + std::to_string(minimum));
    return static_cast<std::size_t>(v);
  }

  std::vector<double> reals(const std::string& key,
                            std::optional<std::vector<double>> fallback = std::nullopt) const {
    if (!has(key)) {
      if (fallback) return *fallback;
      throw InvalidInput("config: missing key '" + key + "'");
    }
    std::vector<double> out;
    try {
      for (const auto& tok : csv::split(str(key))) out.push_back(csv::parse_double(tok));
    } catch (const InvalidInput&) {
      throw InvalidInput("config: key '" + key + "' must be a comma-separated list of numbers");
    }
    for (double v : out)
      if (!std::isfinite(v)) throw InvalidInput("config: key '" + key + "' has non-finite entries");
    return out;
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = str(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw InvalidInput("config: '" + key + "' must be true or false");
  }

  std::filesystem::path path(const std::string& key) const {
    std::filesystem::path p = str(key);
    return p.is_absolute() ? p : raw_.base_dir / p;
  }

  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [k, v] : raw_.values)
      if (!allowed.count(k)) throw InvalidInput("config: unknown key '" + k + "'");
  }

 private:
  RawConfig raw_;
};

namespace detail {

inline TrigPotential potential_from(const RawConfig& cfg, const std::string& name, std::size_t dim) {
  const std::string section = "potential." + name;
  const auto preset = cfg.values.find(name);
  const bool has_section = cfg.sections.count(section) > 0;
  if (preset != cfg.values.end() && has_section)
    throw InvalidInput("config: " + name + " given both as preset and as section");
  if (has_section) {
    std::vector<TrigMode> modes;
    for (const auto& row : cfg.sections.at(section)) {
      if (row.size() != dim + 2)
        throw InvalidInput("config: [" + section + "] rows need " + std::to_string(dim) +
                           " wavevector entries plus a and b");
      TrigMode m;
      for (std::size_t j = 0; j < dim; ++j) {
        if (row[j] != std::floor(row[j]) || std::abs(row[j]) > 1e6)
          throw InvalidInput("config: [" + section + "] wavevector entries must be integers");
        m.k.push_back(static_cast<int>(row[j]));
      }
      m.a = row[dim];
      m.b = row[dim + 1];
      modes.push_back(std::move(m));
    }
    return TrigPotential(dim, std::move(modes));
  }
  const std::string kind = preset == cfg.values.end() ? "free" : preset->second;
  if (kind == "free") return TrigPotential::zero(dim);
  if (kind == "cosine") return TrigPotential::cosine_well(dim);
  throw InvalidInput("config: unknown potential preset '" + kind + "' for " + name);
}

inline std::vector<double> c_from(const Params& p, std::size_t dim,
                                  std::vector<double> fallback) {
  if (!p.has("c")) return fallback;
  std::vector<double> c = p.reals("c");
  if (c.size() == 1 && dim > 1) c.assign(dim, c[0]);
  if (c.size() != dim) throw InvalidInput("config: c must have " + std::to_string(dim) + " entries");
  return c;
}

}  // namespace detail

/// Model from the config itself or from the file named by `model`; c and
/// dim given in the run config take precedence.
inline TonelliModel load_model(const Params& p) {
  if (p.has("model")) {
    const auto path = p.path("model");
    if (!std::filesystem::exists(path)) throw IoError("model file not found: " + path.string());
    const Params mp(parse_file(path));
    mp.require_known({"dim", "V", "W", "c"});
    const std::size_t dim = mp.count("dim", std::size_t{1});
    if (p.has("dim") && p.count("dim") != dim)
      throw InvalidInput("config: dim disagrees with the model file");
    const TrigPotential V = detail::potential_from(mp.raw(), "V", dim);
    const TrigPotential W = detail::potential_from(mp.raw(), "W", dim);
    const auto c = detail::c_from(p, dim, detail::c_from(mp, dim, std::vector<double>(dim, 0.0)));
    return make_mechanical_model(V, W, c);
  }
  const std::size_t dim = p.count("dim", std::size_t{1});
  if (dim > 3) throw InvalidInput("config: dim must be 1, 2 or 3");
  const TrigPotential V = detail::potential_from(p.raw(), "V", dim);
  const TrigPotential W = detail::potential_from(p.raw(), "W", dim);
  return make_mechanical_model(V, W, detail::c_from(p, dim, std::vector<double>(dim, 0.0)));
}

}  // namespace wkam::config
