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

// Target / triager command templates and a small fork+exec runner.

#ifndef UAFD_COMMAND_H_
#define UAFD_COMMAND_H_

#include <chrono>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace uafd {

// A command line where `@@` stands for the input file path. Without `@@`, or
// with `< @@`, the input is fed on stdin instead.
class CommandTemplate {
 public:
  // Splits on whitespace; single and double quotes group words.
  static CommandTemplate Parse(std::string_view command);

  std::vector<std::string> Instantiate(const std::string &input_path) const;
  bool reads_stdin() const { return reads_stdin_; }
  const std::vector<std::string> &argv() const { return argv_; }
  const std::string &program() const { return argv_.front(); }

 private:
  std::vector<std::string> argv_;
  bool reads_stdin_ = true;
};

// True if `program` names an executable file, directly or through PATH.
bool IsExecutable(const std::string &program);

struct ProcessSpec {
  std::vector<std::string> argv;
  std::string stdin_path;   // empty: /dev/null
  std::string output_path;  // receives stdout and stderr; empty: /dev/null
  std::vector<std::pair<std::string, std::string>> extra_env;
  std::chrono::milliseconds timeout{1000};
};

struct ProcessResult {
  bool timed_out = false;
  bool signaled = false;
  int signal = 0;
  int exit_code = 0;
  std::chrono::nanoseconds elapsed{0};
};

// Runs the process in its own process group and kills the group on timeout.
ProcessResult RunProcess(const ProcessSpec &spec);

}  // namespace uafd

#endif  // UAFD_COMMAND_H_
