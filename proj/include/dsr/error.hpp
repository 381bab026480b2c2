#pragma once

#include <stdexcept>
#include <string>

namespace dsr {

enum class ErrCode {
  NonRectangular,
  UnknownChar,
  NoGoal,
  UnreachableGoal,
  StepOnTerminal,
  ShapeMismatch,
  DimensionMismatch,
  BadAction,
  EmptyBatch,
  BadSpec,
  EmptyBuffer,
  InsufficientData,
  TopologyChanged,
  DegenerateBandwidth,
  ConvergenceFailure,
  TooLarge,
  SingularSystem,
  ParseError,
  RangeError,
  IoError,
  VersionMismatch,
  Corrupt,
  BadArgs,
};

inline const char* errcode_name(ErrCode c) {
  switch (c) {
    case ErrCode::NonRectangular: return "NonRectangular";
    case ErrCode::UnknownChar: return "UnknownChar";
    case ErrCode::NoGoal: return "NoGoal";
    case ErrCode::UnreachableGoal: return "UnreachableGoal";
    case ErrCode::StepOnTerminal: return "StepOnTerminal";
    case ErrCode::ShapeMismatch: return "ShapeMismatch";
    case ErrCode::DimensionMismatch: return "DimensionMismatch";
    case ErrCode::BadAction: return "BadAction";
    case ErrCode::EmptyBatch: return "EmptyBatch";
    case ErrCode::BadSpec: return "BadSpec";
    case ErrCode::EmptyBuffer: return "EmptyBuffer";
    case ErrCode::InsufficientData: return "InsufficientData";
    case ErrCode::TopologyChanged: return "TopologyChanged";
    case ErrCode::DegenerateBandwidth: return "DegenerateBandwidth";
    case ErrCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrCode::TooLarge: return "TooLarge";
    case ErrCode::SingularSystem: return "SingularSystem";
    case ErrCode::ParseError: return "ParseError";
    case ErrCode::RangeError: return "RangeError";
    case ErrCode::IoError: return "IoError";
    case ErrCode::VersionMismatch: return "VersionMismatch";
    case ErrCode::Corrupt: return "Corrupt";
    case ErrCode::BadArgs: return "BadArgs";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrCode code, const std::string& msg)
      : std::runtime_error(std::string(errcode_name(code)) + ": " + msg), code_(code) {}

  ErrCode code() const { return code_; }

 private:
  ErrCode code_;
};

[[noreturn]] inline void fail(ErrCode code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, ErrCode code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace dsr
