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

// Stand-in for a memcheck-style triager: replays the input on the synthetic
// program and, on a use-after-free or double free, prints a report in the
// detector's format to stderr.
//
//   fake_triager <program.json> <meta.json> <input>
//
// FAKE_TRIAGER_SLEEP_MS delays the run (for timeout tests).

#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <thread>

#include "uafd/executor.h"
#include "uafd/triage.h"

namespace {

void PrintStack(const std::vector<uafd::StackFrame> &stack, const char *libc_frame) {
  const int pid = static_cast<int>(getpid());
  unsigned address = 0x8048000;
  bool first = true;
  if (libc_frame != nullptr) {
    std::cerr << "==" << pid << "==    at 0x402D358: " << libc_frame
              << " (in vgpreload_memcheck-x86-linux.so)\n";
    first = false;
  }
  for (const auto &f : stack) {
    std::cerr << "==" << pid << "==    " << (first ? "at" : "by") << " 0x" << std::hex
              << (address += 0x40) << std::dec << ": " << f.function_name << " ("
              << f.location << ")\n";
    first = false;
  }
}

}  // namespace

int main(int argc, char **argv) {
  if (argc < 4) {
    std::cerr << "usage: fake_triager <program.json> <meta.json> <input>\n";
    return 2;
  }
  if (const char *ms = std::getenv("FAKE_TRIAGER_SLEEP_MS")) {
    std::this_thread::sleep_for(std::chrono::milliseconds(std::atoi(ms)));
  }
  auto program = uafd::SyntheticProgram::Load(argv[1]);
  auto meta = uafd::StaticMetadata::Load(argv[2]);
  std::ifstream in(argv[3], std::ios::binary);
  std::vector<uint8_t> input(std::istreambuf_iterator<char>(in), {});

  uafd::SyntheticExecutor executor(program, meta);
  uafd::ExecutionFeedback fb;
  executor.Run(input, fb);
  auto trace = uafd::SyntheticBugTrace(program, fb);
  const int pid = static_cast<int>(getpid());
  std::cerr << "==" << pid << "== Memcheck, a memory error detector\n";
  if (trace) {
    bool df = trace->kind == uafd::BugKind::kDoubleFree;
    std::cerr << "==" << pid << "== " << (df ? "Invalid free() / delete / delete[] / realloc()"
                                            : "Invalid read of size 4")
              << "\n";
    PrintStack(trace->use_trace, df ? "free" : nullptr);
    std::cerr << "==" << pid << "==  Address 0x421fdc8 is 0 bytes inside a block of size 4 free'd\n";
    PrintStack(trace->free_trace, "free");
    std::cerr << "==" << pid << "==  Block was alloc'd at\n";
    PrintStack(trace->alloc_trace, "malloc");
    std::cerr << "==" << pid << "==\n";
  }
  std::cerr << "==" << pid << "== ERROR SUMMARY: " << (trace ? 1 : 0)
            << " errors from " << (trace ? 1 : 0) << " contexts\n";
  return 0;
}
