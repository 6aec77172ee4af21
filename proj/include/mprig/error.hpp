#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mprig {

/// Failure categories shared by the C++ core and the C API status codes.
enum class ErrorCode {
  kInvalidArgument = 1,
  kSyntax,
  kUnknownIdentifier,
  kDomain,
  kSingularMetric,
  kEnergyLevel,
  kDegenerateGradient,
  kNotTangent,
  kNonConvex,
  kStepUnderflow,
  kEnergyDrift,
  kNoExit,
  kLeftDomain,
  kNoConvergence,
  kQuadrature,
  kExtrapolation,
  kNotInvertible,
  kConfig,
  kQualification,
  kIo,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Expression syntax error; carries the byte offset and the tokens that would
/// have been accepted there.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t offset, std::vector<std::string> expected,
             const std::string& message);
  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

}  // namespace mprig
