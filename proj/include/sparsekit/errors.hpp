// Copyright 2026 the sparsekit authors
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

namespace sparsekit {

enum class ErrorCode {
  kConfig,
  kPrecondition,
  kDimensionMismatch,
  kBarrierViolation,
  kNotPsd,
  kSingularGram,
  kNoPositiveEntry,
  kNumericalWarning,
  kNotFound,
  kIsotropyViolation,
  kNoWitness,
  kBarrierCollapse,
  kNoEligibleRemoval,
  kIterationExhausted,
  kParse,
};

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kPrecondition: return "PreconditionViolation";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kBarrierViolation: return "BarrierViolation";
    case ErrorCode::kNotPsd: return "NotPSD";
    case ErrorCode::kSingularGram: return "SingularGram";
    case ErrorCode::kNoPositiveEntry: return "NoPositiveEntry";
    case ErrorCode::kNumericalWarning: return "NumericalWarning";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kIsotropyViolation: return "IsotropyViolation";
    case ErrorCode::kNoWitness: return "NoWitness";
    case ErrorCode::kBarrierCollapse: return "BarrierCollapse";
    case ErrorCode::kNoEligibleRemoval: return "NoEligibleRemoval";
    case ErrorCode::kIterationExhausted: return "IterationExhausted";
    case ErrorCode::kParse: return "ParseError";
  }
  return "Error";
}

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

template <ErrorCode C>
class CodedError : public Error {
 public:
  explicit CodedError(const std::string &message) : Error(C, message) {}
};

using ConfigError = CodedError<ErrorCode::kConfig>;
using PreconditionViolation = CodedError<ErrorCode::kPrecondition>;
using DimensionMismatch = CodedError<ErrorCode::kDimensionMismatch>;
using BarrierViolation = CodedError<ErrorCode::kBarrierViolation>;
using NotPsd = CodedError<ErrorCode::kNotPsd>;
using SingularGram = CodedError<ErrorCode::kSingularGram>;
using NoPositiveEntry = CodedError<ErrorCode::kNoPositiveEntry>;
using NumericalWarning = CodedError<ErrorCode::kNumericalWarning>;
using NotFound = CodedError<ErrorCode::kNotFound>;
using IsotropyViolation = CodedError<ErrorCode::kIsotropyViolation>;
using NoWitness = CodedError<ErrorCode::kNoWitness>;
using BarrierCollapse = CodedError<ErrorCode::kBarrierCollapse>;
using NoEligibleRemoval = CodedError<ErrorCode::kNoEligibleRemoval>;
using IterationExhausted = CodedError<ErrorCode::kIterationExhausted>;
using ParseError = CodedError<ErrorCode::kParse>;

}  // namespace sparsekit
