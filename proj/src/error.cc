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

#include "j2k/error.h"

namespace j2k {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedDocument: return "MalformedDocument";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kInvalidMarker: return "InvalidMarker";
    case ErrorCode::kCycleDetected: return "CycleDetected";
    case ErrorCode::kDuplicateStepId: return "DuplicateStepId";
    case ErrorCode::kInvalidName: return "InvalidName";
    case ErrorCode::kMissingField: return "MissingField";
    case ErrorCode::kInvalidBounds: return "InvalidBounds";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kUnboundClaim: return "UnboundClaim";
    case ErrorCode::kDuplicateName: return "DuplicateName";
    case ErrorCode::kServiceNotFound: return "ServiceNotFound";
    case ErrorCode::kUnknownIp: return "UnknownIp";
    case ErrorCode::kNoBackend: return "NoBackend";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace j2k
