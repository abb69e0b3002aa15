#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aeroselect {

enum class ErrorCode {
  // sensor_wire
  InvalidGeometry,
  SingularGeometry,
  TrajectoryOutOfBounds,
  // localization
  ClockRegression,
  // game_core
  InvalidInputForPhase,
  SessionEnded,
  NoAttempts,
  OutOfScale,
  // session_store
  InvalidRecord,
  StorageFailure,
  CorruptLog,
  // analytics
  EmptySample,
  NonFiniteValue,
  SampleTooSmall,
  SampleTooLarge,
  ZeroVariance,
  MissingMethod,
  InvalidCohortSpec,
  // cli_service
  ConfigError,
  InputClosed,
  BindError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidGeometry: return "InvalidGeometry";
    case ErrorCode::SingularGeometry: return "SingularGeometry";
    case ErrorCode::TrajectoryOutOfBounds: return "TrajectoryOutOfBounds";
    case ErrorCode::ClockRegression: return "ClockRegression";
    case ErrorCode::InvalidInputForPhase: return "InvalidInputForPhase";
    case ErrorCode::SessionEnded: return "SessionEnded";
    case ErrorCode::NoAttempts: return "NoAttempts";
    case ErrorCode::OutOfScale: return "OutOfScale";
    case ErrorCode::InvalidRecord: return "InvalidRecord";
    case ErrorCode::StorageFailure: return "StorageFailure";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::SampleTooSmall: return "SampleTooSmall";
    case ErrorCode::SampleTooLarge: return "SampleTooLarge";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::MissingMethod: return "MissingMethod";
    case ErrorCode::InvalidCohortSpec: return "InvalidCohortSpec";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InputClosed: return "InputClosed";
    case ErrorCode::BindError: return "BindError";
  }
  return "Unknown";
}

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace aeroselect
