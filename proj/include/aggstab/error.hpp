// Copyright 2026 The aggstab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef AGGSTAB_ERROR_HPP_
#define AGGSTAB_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace aggstab {

// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  kInvalidInput = 2,   // malformed arguments, files, or shapes
  kDataSemantics = 3,  // well-formed input that cannot be used (e.g. no raters)
  kNumericDomain = 4,  // numeric preconditions (spectral coverage, ...)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(const std::string& what) {
  throw Error(ErrorKind::kInvalidInput, what);
}

[[noreturn]] inline void FailData(const std::string& what) {
  throw Error(ErrorKind::kDataSemantics, what);
}

[[noreturn]] inline void FailNumeric(const std::string& what) {
  throw Error(ErrorKind::kNumericDomain, what);
}

inline void Require(bool condition, const std::string& what) {
  if (!condition) Fail(what);
}

}  // namespace aggstab

#endif  // AGGSTAB_ERROR_HPP_
