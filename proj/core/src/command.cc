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

#include "uafd/command.h"

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "uafd/error.h"

namespace uafd {

CommandTemplate CommandTemplate::Parse(std::string_view command) {
  std::vector<std::string> words;
  std::string word;
  bool in_word = false;
  char quote = 0;
  for (char c : command) {
    if (quote != 0) {
      if (c == quote) {
        quote = 0;
      } else {
        word += c;
      }
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
      in_word = true;
    } else if (c == ' ' || c == '\t' || c == '\n') {
      if (in_word) words.push_back(std::move(word));
      word.clear();
      in_word = false;
    } else {
      word += c;
      in_word = true;
    }
  }
  if (quote != 0) throw ConfigError("unterminated quote in command template");
  if (in_word) words.push_back(std::move(word));

  CommandTemplate t;
  for (size_t i = 0; i < words.size(); ++i) {
    if (words[i] == "<" && i + 1 < words.size() && words[i + 1] == "@@") {
      ++i;  // stdin redirect
      continue;
    }
    if (words[i].find("@@") != std::string::npos) t.reads_stdin_ = false;
    t.argv_.push_back(words[i]);
  }
  if (t.argv_.empty()) throw ConfigError("empty command template");
  return t;
}

std::vector<std::string> CommandTemplate::Instantiate(
    const std::string &input_path) const {
  std::vector<std::string> out = argv_;
  for (std::string &w : out) {
    for (size_t pos = w.find("@@"); pos != std::string::npos;
         pos = w.find("@@", pos + input_path.size())) {
      w.replace(pos, 2, input_path);
    }
  }
  return out;
}

bool IsExecutable(const std::string &program) {
  auto ok = [](const std::string &path) {
    struct stat st{};
    return ::stat(path.c_str(), &st) == 0 && S_ISREG(st.st_mode) &&
           ::access(path.c_str(), X_OK) == 0;
  };
  if (program.find('/') != std::string::npos) return ok(program);
  const char *path = std::getenv("PATH");
  if (path == nullptr) return false;
  std::string_view rest(path);
  while (true) {
    size_t colon = rest.find(':');
    std::string dir(rest.substr(0, colon));
    if (dir.empty()) dir = ".";
    if (ok(dir + "/" + program)) return true;
    if (colon == std::string_view::npos) return false;
    rest.remove_prefix(colon + 1);
  }
}

ProcessResult RunProcess(const ProcessSpec &spec) {
  if (spec.argv.empty()) throw ConfigError("empty argv");
  std::vector<char *> argv;
  for (const std::string &a : spec.argv) argv.push_back(const_cast<char *>(a.c_str()));
  argv.push_back(nullptr);

  const auto start = std::chrono::steady_clock::now();
  pid_t pid = ::fork();
  if (pid < 0) throw Error(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    int in = ::open(spec.stdin_path.empty() ? "/dev/null" : spec.stdin_path.c_str(),
                    O_RDONLY);
    int out = spec.output_path.empty()
                  ? ::open("/dev/null", O_WRONLY)
                  : ::open(spec.output_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC,
                           0644);
    if (in < 0 || out < 0) ::_exit(126);
    ::dup2(in, STDIN_FILENO);
    ::dup2(out, STDOUT_FILENO);
    ::dup2(out, STDERR_FILENO);
    ::close(in);
    ::close(out);
    for (const auto &[k, v] : spec.extra_env) ::setenv(k.c_str(), v.c_str(), 1);
    ::execvp(argv[0], argv.data());
    ::_exit(127);
  }

  ProcessResult result;
  int status = 0;
  auto delay = std::chrono::microseconds(50);
  while (true) {
    pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) {
      throw Error(std::string("waitpid failed: ") + std::strerror(errno));
    }
    if (std::chrono::steady_clock::now() - start >= spec.timeout) {
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      result.timed_out = true;
      break;
    }
    std::this_thread::sleep_for(delay);
    delay = std::min(delay * 2, std::chrono::microseconds(2000));
  }
  result.elapsed = std::chrono::steady_clock::now() - start;
  if (!result.timed_out) {
    if (WIFSIGNALED(status)) {
      result.signaled = true;
      result.signal = WTERMSIG(status);
    } else if (WIFEXITED(status)) {
      result.exit_code = WEXITSTATUS(status);
    }
  }
  return result;
}

}  // namespace uafd
