// Copyright 2026 The ldistill Authors
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

#ifndef LDISTILL_ERROR_HPP_
#define LDISTILL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace ldistill {

// Error categories. Values are shared with the C API status codes.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kDomain = 2,
  kShape = 3,
  kInit = 4,
  kFingerprint = 5,
  kIo = 6,
  kFormat = 7,
  kNumeric = 8,
  kDegenerate = 9,
  kConfig = 10,
  kResource = 11,
  kInternal = 12,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void Fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void Require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

}  // namespace ldistill

#endif  // LDISTILL_ERROR_HPP_
