// Copyright 2026 The mixsim Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mixsim {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNonFinite,
  kUnsupported,
  kNoConsensus,
  kMixingNotObserved,
  kPrecondition,
  kDiverged,
  kConfig,
  kIo,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised when no window up to the configured maximum halves the distance to
// consensus. Carries the smallest ratio seen so callers can report it.
class MixingNotObserved : public Error {
 public:
  MixingNotObserved(double best_ratio, std::size_t max_window)
      : Error(ErrorCode::kMixingNotObserved,
              "mixing not observed within " + std::to_string(max_window) +
                  " slots (best ratio " + std::to_string(best_ratio) + ")"),
        best_ratio_(best_ratio) {}

  double best_ratio() const noexcept { return best_ratio_; }

 private:
  double best_ratio_;
};

}  // namespace mixsim
