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

#include "filtra/error.hpp"

namespace filtra {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kDuplicateItemId: return "DuplicateItemId";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kDegenerateRange: return "DegenerateRange";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kKTooLarge: return "KTooLarge";
    case ErrorCode::kSyntaxError: return "SyntaxError";
    case ErrorCode::kUnknownFeature: return "UnknownFeature";
    case ErrorCode::kUnknownValue: return "UnknownValue";
    case ErrorCode::kMissingItem: return "MissingItem";
    case ErrorCode::kDivByZero: return "DivByZero";
    case ErrorCode::kUnknownTask: return "UnknownTask";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kInvalidRequest: return "InvalidRequest";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kWriteError: return "WriteError";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kTruncated: return "Truncated";
    case ErrorCode::kEmptyWorkload: return "EmptyWorkload";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::vector<std::int64_t> args)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), args_(std::move(args)) {}

}  // namespace filtra
