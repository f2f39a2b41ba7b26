/* Copyright 2026 The ctcocr Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef CTCOCR_ERRORS_H_
#define CTCOCR_ERRORS_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctcocr {

// Failure categories shared by every module. The CLI reports the kind in its
// machine-readable error record, so the names are part of the interface.
enum class ErrorKind {
  kInvalidInput,
  kCapacity,
  kFormat,
  kConfig,
  kTraining,
  kNumeric,
  kIo,
};

std::string_view ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error InvalidInput(const std::string& m) {
  return Error(ErrorKind::kInvalidInput, m);
}
inline Error CapacityError(const std::string& m) {
  return Error(ErrorKind::kCapacity, m);
}
inline Error FormatError(const std::string& m) {
  return Error(ErrorKind::kFormat, m);
}
inline Error ConfigError(const std::string& m) {
  return Error(ErrorKind::kConfig, m);
}
inline Error TrainingError(const std::string& m) {
  return Error(ErrorKind::kTraining, m);
}
inline Error NumericError(const std::string& m) {
  return Error(ErrorKind::kNumeric, m);
}
inline Error IoError(const std::string& m) { return Error(ErrorKind::kIo, m); }

}  // namespace ctcocr

#endif  // CTCOCR_ERRORS_H_
