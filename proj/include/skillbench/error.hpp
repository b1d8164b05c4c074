#pragma once

#include <stdexcept>
#include <string>

namespace skillbench {

enum class ErrorCode {
  // skill repository
  MissingFrontmatter,
  MissingField,
  InvalidName,
  DuplicateSkillName,
  InsufficientPool,
  // prompt protocol
  EmptyHub,
  EmptySelection,
  ParseFailure,
  SchemaViolation,
  // backend
  ContextOverflow,
  TransportError,
  ScriptExhausted,
  EmptyInput,
  // disclosure controller
  ImpossibleObservation,
  StateSpaceTooLarge,
  InvalidModel,
  // harness
  EmptyDataset,
  DegenerateInput,
  IoError,
  ConfigError,
};

const char* error_code_name(ErrorCode code);

// Single exception type for all library errors; `code` is the machine-readable
// discriminant, `what()` carries the human-readable detail (path, line, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + std::move(message)),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace skillbench
