// Copyright 2026 The uafd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "config.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>

#include <fmt/format.h>

#include "uafd/error.h"

namespace uafd::cli {
namespace {

std::string Trim(const std::string &s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T ParseNumber(const std::string &key, const std::string &value) {
  T out{};
  const char *end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) {
    throw ConfigError(fmt::format("{}: cannot parse '{}'", key, value));
  }
  return out;
}

double ParseReal(const std::string &key, const std::string &value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception &) {
  }
  throw ConfigError(fmt::format("{}: cannot parse '{}'", key, value));
}

void Apply(Config &c, const std::string &key, const std::string &value) {
  if (key == "beta") {
    c.beta = ParseReal(key, value);
  } else if (key == "delta") {
    c.delta = ParseReal(key, value);
  } else if (key == "alpha") {
    c.alpha = ParseReal(key, value);
  } else if (key == "c_scale") {
    c.c_scale = ParseReal(key, value);
  } else if (key == "havoc") {
    c.havoc = ParseNumber<uint32_t>(key, value);
  } else if (key == "rng_seed") {
    c.rng_seed = ParseNumber<uint64_t>(key, value);
  } else if (key == "exec_budget") {
    if (value == "none") {
      c.exec_budget.reset();
    } else {
      c.exec_budget = ParseNumber<uint64_t>(key, value);
    }
  } else if (key == "timeout") {
    if (value == "none") {
      c.timeout.reset();
    } else {
      c.timeout = ParseDuration(value);
    }
  } else if (key == "exec_timeout") {
    c.exec_timeout = ParseDuration(value);
  } else if (key == "triager_timeout") {
    c.triager_timeout = ParseDuration(value);
  } else if (key == "jobs") {
    c.jobs = ParseNumber<unsigned>(key, value);
  } else if (key == "max_input_size") {
    c.max_input_size = ParseNumber<size_t>(key, value);
  } else if (key == "schedule") {
    c.schedule = value;
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

}  // namespace

const std::vector<std::string> &ConfigKeys() {
  static const std::vector<std::string> keys = {
      "beta",    "delta",        "alpha",           "c_scale", "havoc",
      "rng_seed", "exec_budget", "timeout",         "exec_timeout",
      "triager_timeout", "jobs", "max_input_size",  "schedule"};
  return keys;
}

std::chrono::milliseconds ParseDuration(const std::string &text) {
  std::string t = Trim(text);
  size_t digits = 0;
  while (digits < t.size() && (std::isdigit(static_cast<unsigned char>(t[digits])) ||
                               t[digits] == '.')) {
    ++digits;
  }
  if (digits == 0) throw ConfigError("bad duration '" + text + "'");
  double n = ParseReal("duration", t.substr(0, digits));
  std::string unit = t.substr(digits);
  double ms;
  if (unit.empty() || unit == "s") {
    ms = n * 1000;
  } else if (unit == "ms") {
    ms = n;
  } else if (unit == "m" || unit == "min") {
    ms = n * 60'000;
  } else if (unit == "h") {
    ms = n * 3'600'000;
  } else {
    throw ConfigError("bad duration unit in '" + text + "'");
  }
  return std::chrono::milliseconds(static_cast<int64_t>(ms + 0.5));
}

void Config::Validate() const {
  if (!(beta > 0 && beta <= 1)) throw ConfigError("beta must lie in (0, 1]");
  if (!(delta > 0 && delta < 1)) throw ConfigError("delta must lie in (0, 1)");
  if (!(alpha >= 0 && alpha <= 1)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(c_scale > 0)) throw ConfigError("c_scale must be positive");
  if (havoc == 0) throw ConfigError("havoc must be positive");
  if (exec_timeout.count() <= 0) throw ConfigError("exec_timeout must be positive");
  if (triager_timeout.count() <= 0) throw ConfigError("triager_timeout must be positive");
  if (jobs == 0) throw ConfigError("jobs must be at least 1");
  if (max_input_size == 0) throw ConfigError("max_input_size must be positive");
  if (schedule != "directed" && schedule != "coverage") {
    throw ConfigError("schedule must be directed or coverage");
  }
}

std::string Config::Echo(const Settings &extra) const {
  std::string out;
  out += fmt::format("beta={}\ndelta={}\nalpha={}\nc_scale={}\nhavoc={}\nrng_seed={}\n",
                     beta, delta, alpha, c_scale, havoc, rng_seed);
  out += fmt::format("exec_budget={}\n",
                     exec_budget ? std::to_string(*exec_budget) : "none");
  out += fmt::format("timeout={}\n",
                     timeout ? std::to_string(timeout->count()) + "ms" : "none");
  out += fmt::format("exec_timeout={}ms\ntriager_timeout={}ms\njobs={}\n",
                     exec_timeout.count(), triager_timeout.count(), jobs);
  out += fmt::format("max_input_size={}\nschedule={}\n", max_input_size, schedule);
  for (const auto &[k, v] : extra) out += fmt::format("{}={}\n", k, v);
  return out;
}

Settings ReadConfigFile(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Settings settings;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // No setting value contains '#', so everything after one is a comment.
    std::string t = Trim(line.substr(0, line.find('#')));
    if (t.empty()) continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected key=value", path.string(), lineno));
    }
    std::string key = Trim(t.substr(0, eq));
    const auto &keys = ConfigKeys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError(fmt::format("{}:{}: unknown setting '{}'", path.string(),
                                    lineno, key));
    }
    settings[key] = Trim(t.substr(eq + 1));
  }
  return settings;
}

Settings EnvSettings(const std::function<const char *(const char *)> &getenv) {
  Settings settings;
  for (const std::string &key : ConfigKeys()) {
    std::string var = "UAFD_" + key;
    std::transform(var.begin(), var.end(), var.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    if (const char *v = getenv(var.c_str()); v != nullptr) settings[key] = v;
  }
  return settings;
}

Config ResolveConfig(const Settings &file, const Settings &env, const Settings &cli) {
  Config c;
  for (const Settings *layer : {&file, &env, &cli}) {
    for (const auto &[key, value] : *layer) Apply(c, key, value);
  }
  c.Validate();
  return c;
}

}  // namespace uafd::cli
