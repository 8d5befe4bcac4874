#include "threshtest/errors.hpp"

namespace threshtest {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::Untestable: return "Untestable";
    case ErrorKind::NotApplicable: return "NotApplicable";
    case ErrorKind::Degenerate: return "Degenerate";
    case ErrorKind::InsufficientDraws: return "InsufficientDraws";
    case ErrorKind::StatisticMismatch: return "StatisticMismatch";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::UnsupportedScale: return "UnsupportedScale";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::UnsupportedDimension: return "UnsupportedDimension";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::Parse: return "Parse";
  }
  return "Unknown";
}

}  // namespace threshtest
