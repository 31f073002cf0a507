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

// Effective configuration of the uafd tool. Every setting is a key=value
// pair; later sources override earlier ones:
//   default < config file < UAFD_<KEY> environment variable < command line.

#ifndef UAFD_TOOLS_CONFIG_H_
#define UAFD_TOOLS_CONFIG_H_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace uafd::cli {

using Settings = std::map<std::string, std::string>;

struct Config {
  double beta = 0.25;
  double delta = 0.5;
  double alpha = 0.01;
  double c_scale = 10;
  uint32_t havoc = 256;
  uint64_t rng_seed = 0;
  std::optional<uint64_t> exec_budget;
  std::optional<std::chrono::milliseconds> timeout;  // campaign wall time
  std::chrono::milliseconds exec_timeout{1000};
  std::chrono::milliseconds triager_timeout{60000};
  unsigned jobs = 1;
  size_t max_input_size = 1 << 20;
  std::string schedule = "directed";

  // Throws ConfigError when an invariant does not hold.
  void Validate() const;
  // key=value lines for every setting, followed by `extra` (paths and such).
  std::string Echo(const Settings &extra = {}) const;
};

// The recognized keys, in echo order.
const std::vector<std::string> &ConfigKeys();

// key=value lines; blank lines and '#' comments are skipped. Throws
// ConfigError on unknown keys or malformed lines.
Settings ReadConfigFile(const std::filesystem::path &path);

// Picks UAFD_<KEY> variables through `getenv`.
Settings EnvSettings(const std::function<const char *(const char *)> &getenv);

// Applies file, env and cli settings over the defaults, then validates.
Config ResolveConfig(const Settings &file, const Settings &env, const Settings &cli);

// "250ms", "30s", "5m", "2h"; a bare number means seconds.
std::chrono::milliseconds ParseDuration(const std::string &text);

}  // namespace uafd::cli

#endif  // UAFD_TOOLS_CONFIG_H_
