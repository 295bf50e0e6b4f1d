// Copyright 2026 The mrarl Authors
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mrarl {

enum class ErrorCode {
  kInvalidArgument,
  kSingularSystem,
  kNotPsd,
  kRNotInvertible,
  kNoConvergence,
  kNotStabilizable,
  kDegenerateInductance,
  kWindowTooLong,
  kMatchingViolation,
  kDivergence,
  kConfig,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kSingularSystem: return "singular-system";
    case ErrorCode::kNotPsd: return "not-psd";
    case ErrorCode::kRNotInvertible: return "r-not-invertible";
    case ErrorCode::kNoConvergence: return "no-convergence";
    case ErrorCode::kNotStabilizable: return "not-stabilizable";
    case ErrorCode::kDegenerateInductance: return "degenerate-inductance";
    case ErrorCode::kWindowTooLong: return "window-too-long";
    case ErrorCode::kMatchingViolation: return "matching-violation";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mrarl
