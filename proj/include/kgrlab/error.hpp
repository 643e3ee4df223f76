// Copyright 2026 The kgrlab Authors.
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

namespace kgrlab {

enum class ErrorCode {
  kMalformedLine,
  kUnknownCategory,
  kUnknownEntity,
  kUnknownRelation,
  kSchemaViolation,
  kDuplicateRelationDecl,
  kInvalidSpec,
  kCyclic,
  kDisconnected,
  kMultipleTargets,
  kSchemaInconsistent,
  kUnknownAnchor,
  kUnsatisfiable,
  kIncompatibleTarget,
  kInvalidDim,
  kDimMismatch,
  kShapeMismatch,
  kEmptyInput,
  kEmptyTrainSet,
  kEmptyResults,
  kInvalidK,
  kMismatchedSets,
  kMissingTargetAnswer,
  kEmptyQStar,
  kMissingGoal,
  kInvalidConfig,
  kIoError,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedLine: return "MalformedLine";
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kUnknownEntity: return "UnknownEntity";
    case ErrorCode::kUnknownRelation: return "UnknownRelation";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kDuplicateRelationDecl: return "DuplicateRelationDecl";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kCyclic: return "Cyclic";
    case ErrorCode::kDisconnected: return "Disconnected";
    case ErrorCode::kMultipleTargets: return "MultipleTargets";
    case ErrorCode::kSchemaInconsistent: return "SchemaInconsistent";
    case ErrorCode::kUnknownAnchor: return "UnknownAnchor";
    case ErrorCode::kUnsatisfiable: return "Unsatisfiable";
    case ErrorCode::kIncompatibleTarget: return "IncompatibleTarget";
    case ErrorCode::kInvalidDim: return "InvalidDim";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyTrainSet: return "EmptyTrainSet";
    case ErrorCode::kEmptyResults: return "EmptyResults";
    case ErrorCode::kInvalidK: return "InvalidK";
    case ErrorCode::kMismatchedSets: return "MismatchedSets";
    case ErrorCode::kMissingTargetAnswer: return "MissingTargetAnswer";
    case ErrorCode::kEmptyQStar: return "EmptyQStar";
    case ErrorCode::kMissingGoal: return "MissingGoal";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace kgrlab
