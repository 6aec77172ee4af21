#include "mprig/error.hpp"

#include <sstream>

namespace mprig {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kSyntax: return "syntax error";
    case ErrorCode::kUnknownIdentifier: return "unknown identifier";
    case ErrorCode::kDomain: return "domain error";
    case ErrorCode::kSingularMetric: return "singular metric";
    case ErrorCode::kEnergyLevel: return "energy level violation";
    case ErrorCode::kDegenerateGradient: return "degenerate gradient";
    case ErrorCode::kNotTangent: return "vector not tangent to the boundary";
    case ErrorCode::kNonConvex: return "boundary not strictly convex";
    case ErrorCode::kStepUnderflow: return "step size underflow";
    case ErrorCode::kEnergyDrift: return "energy drift";
    case ErrorCode::kNoExit: return "trajectory did not exit";
    case ErrorCode::kLeftDomain: return "trajectory left the domain";
    case ErrorCode::kNoConvergence: return "no convergence";
    case ErrorCode::kQuadrature: return "quadrature failure";
    case ErrorCode::kExtrapolation: return "extrapolation residual too large";
    case ErrorCode::kNotInvertible: return "map not invertible";
    case ErrorCode::kConfig: return "configuration error";
    case ErrorCode::kQualification: return "qualification failure";
    case ErrorCode::kIo: return "i/o error";
  }
  return "unknown error";
}

namespace {

std::string format_parse_message(std::size_t offset, const std::vector<std::string>& expected,
                                 const std::string& message) {
  std::ostringstream os;
  os << message << " at offset " << offset;
  if (!expected.empty()) {
    os << "; expected one of:";
    for (const auto& e : expected) os << ' ' << e;
  }
  return os.str();
}

}  // namespace

ParseError::ParseError(ErrorCode code, std::size_t offset, std::vector<std::string> expected,
                       const std::string& message)
    : Error(code, format_parse_message(offset, expected, message)),
      offset_(offset),
      expected_(std::move(expected)) {}

}  // namespace mprig
