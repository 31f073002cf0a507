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

#ifndef UAFD_ERROR_H_
#define UAFD_ERROR_H_

#include <stdexcept>
#include <string>
#include <vector>

namespace uafd {

// Non-fatal diagnostics collected by loaders and analyses. Callers that do
// not care pass nullptr.
using Warnings = std::vector<std::string>;

inline void Warn(Warnings *warnings, std::string message) {
  if (warnings != nullptr) warnings->push_back(std::move(message));
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class UnknownId : public Error {
 public:
  using Error::Error;
};

// A location tag matched several blocks and the owning function name did not
// disambiguate them.
class AmbiguousLocation : public Error {
 public:
  AmbiguousLocation(const std::string &location,
                    std::vector<std::string> candidates);
  const std::vector<std::string> &candidates() const { return candidates_; }

 private:
  std::vector<std::string> candidates_;
};

class InconsistentRoot : public Error {
 public:
  using Error::Error;
};

class UnresolvedEvent : public Error {
 public:
  using Error::Error;
};

class UnknownEdge : public Error {
 public:
  using Error::Error;
};

class TargetUnavailable : public Error {
 public:
  using Error::Error;
};

class FeedbackDecodeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CorpusReadError : public Error {
 public:
  using Error::Error;
};

class TriagerUnavailable : public Error {
 public:
  using Error::Error;
};

}  // namespace uafd

#endif  // UAFD_ERROR_H_
