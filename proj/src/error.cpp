#include "cavlock/error.hpp"

namespace cavlock {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::AboveThreshold: return "AboveThreshold";
    case ErrorCode::DegenerateScale: return "DegenerateScale";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::UnstableState: return "UnstableState";
    case ErrorCode::CornerNotResolved: return "CornerNotResolved";
    case ErrorCode::InfeasibleUGF: return "InfeasibleUGF";
    case ErrorCode::UnstableLoop: return "UnstableLoop";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace cavlock
