#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace prism {

enum class ErrorCode {
  // table-core
  EmptySource,
  DuplicateId,
  RaggedRow,
  MissingId,
  MalformedCsv,
  SchemaError,
  UnknownColumn,
  TypeMismatch,
  SizeMismatch,
  NonFinite,
  ChecksumMismatch,
  // state-engine
  SyntaxError,
  InvalidState,
  MalformedToken,
  UnknownId,
  // analytics
  ZeroVector,
  DegenerateInput,
  DimensionMismatch,
  InvalidArgument,
  NonCategorical,
  UnknownClass,
  CardinalityExplosion,
  MalformedHierarchy,
  // dashboard-bundle
  ValidationErrors,
  MissingArtifact,
  UnsupportedVersion,
  MalformedArtifact,
  // service-cli
  IoError,
  PortInUse,
  Internal,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySource: return "EmptySource";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::MissingId: return "MissingId";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::MalformedToken: return "MalformedToken";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonCategorical: return "NonCategorical";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::CardinalityExplosion: return "CardinalityExplosion";
    case ErrorCode::MalformedHierarchy: return "MalformedHierarchy";
    case ErrorCode::ValidationErrors: return "ValidationErrors";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::MalformedArtifact: return "MalformedArtifact";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::PortInUse: return "PortInUse";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

// Errors caused by the environment rather than by the caller's input.
constexpr bool is_environment_error(ErrorCode code) {
  return code == ErrorCode::IoError || code == ErrorCode::PortInUse ||
         code == ErrorCode::Internal;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

// Aggregated validation failure; every problem is reported, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(ErrorCode::ValidationErrors, join(problems)),
        problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
      if (!out.empty()) out += "; ";
      out += item;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace prism
