// Copyright (C) 2026 The Filtra Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not use this file except in compliance
// with the License. You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed under the License
// is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express
// or implied. See the License for the specific language governing permissions and limitations under the License.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace filtra {

enum class ErrorCode {
  kParseError,
  kDuplicateItemId,
  kDimMismatch,
  kInvalidSpec,
  kDegenerateRange,
  kLengthMismatch,
  kKTooLarge,
  kSyntaxError,
  kUnknownFeature,
  kUnknownValue,
  kMissingItem,
  kDivByZero,
  kUnknownTask,
  kInvalidConfig,
  kInvalidRequest,
  kIoError,
  kWriteError,
  kBadMagic,
  kVersionUnsupported,
  kChecksumMismatch,
  kTruncated,
  kEmptyWorkload,
};

const char* to_string(ErrorCode code);

// Every failure in the library is reported as an Error. `args` carries the
// structured payload (line number, offending id, expected/got, section id)
// so callers and tests do not need to parse the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::vector<std::int64_t> args = {});

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::int64_t>& args() const noexcept { return args_; }

 private:
  ErrorCode code_;
  std::vector<std::int64_t> args_;
};

}  // namespace filtra
