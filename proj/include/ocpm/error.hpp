// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ocpm {

enum class ErrorKind {
  MalformedInput,
  DanglingObjectRef,
  UnparseableTimestamp,
  InvalidEvent,
  UnknownObjectType,
  UnknownActivity,
  NonMonotonicTimestamps,
  EmptyTrainingSplit,
  PrefixTooLong,
  ShapeMismatch,
  IndexOutOfRange,
  NonFiniteGradient,
  NonFiniteLoss,
  VersionMismatch,
  CorruptCheckpoint,
  EmptyDataset,
  EmptyTestSplit,
  InvalidConfig,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedInput: return "MalformedInput";
    case ErrorKind::DanglingObjectRef: return "DanglingObjectRef";
    case ErrorKind::UnparseableTimestamp: return "UnparseableTimestamp";
    case ErrorKind::InvalidEvent: return "InvalidEvent";
    case ErrorKind::UnknownObjectType: return "UnknownObjectType";
    case ErrorKind::UnknownActivity: return "UnknownActivity";
    case ErrorKind::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorKind::EmptyTrainingSplit: return "EmptyTrainingSplit";
    case ErrorKind::PrefixTooLong: return "PrefixTooLong";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::EmptyTestSplit: return "EmptyTestSplit";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure surfaced by the library carries a kind so the CLI can map
/// it onto a stable exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The text without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

/// Exit codes: 0 success, 2 usage/IO, 3 data validation, 4 training failure.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io:
    case ErrorKind::InvalidConfig:
      return 2;
    case ErrorKind::NonFiniteGradient:
    case ErrorKind::NonFiniteLoss:
    case ErrorKind::EmptyDataset:
    case ErrorKind::EmptyTrainingSplit:
      return 4;
    default:
      return 3;
  }
}

}  // namespace ocpm
