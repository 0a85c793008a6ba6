// Copyright 2026 The j2k Authors.
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

#ifndef J2K_ERROR_H_
#define J2K_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace j2k {

enum class ErrorCode {
  kMalformedDocument,
  kUnsupportedFormat,
  kInvalidMarker,
  kCycleDetected,
  kDuplicateStepId,
  kInvalidName,
  kMissingField,
  kInvalidBounds,
  kInvalidConfig,
  kUnboundClaim,
  kDuplicateName,
  kServiceNotFound,
  kUnknownIp,
  kNoBackend,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

// All recoverable failures in the library are reported as j2k::Error. The
// code identifies the contract violation; what() carries the diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace j2k

#endif  // J2K_ERROR_H_
