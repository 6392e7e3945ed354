#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metadkit {

enum class ErrorKind {
  // data loading
  ParseError,
  MissingField,
  DuplicateKey,
  NonFiniteConfidence,
  EmptySet,
  // binning
  TooFewTrials,
  AlreadyPadded,
  // numerics
  OutOfDomain,
  ZeroDPrime,
  OneClassOnly,
  LengthMismatch,
  ZeroVariance,
  // profiles and contrasts
  MixedProfileSet,
  DomainMismatch,
  UnpairedSets,
  WrongCiLevel,
  MissingCondition,
  // configuration / generation / rendering
  InvalidConfig,
  UnsupportedFamily,
  IncompleteInput,
  EmptyInput,
};

std::string_view to_string(ErrorKind kind);

// Exceptions thrown by the library. `kind` is the stable, machine-checkable
// part; the message carries the human context (field, line, key).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct Issue {
  ErrorKind kind;
  std::size_t line = 0;  // 1-based; 0 when not tied to a line
  std::string message;
};

// Thrown by the trial loader after scanning a whole file, so every problem
// is reported in one pass. kind() is the kind of the first issue.
class LoadError : public Error {
 public:
  explicit LoadError(std::vector<Issue> issues);

  const std::vector<Issue>& issues() const noexcept { return issues_; }

 private:
  std::vector<Issue> issues_;
};

// Non-fatal condition attached to a result.
struct Warning {
  std::string code;
  std::string message;
};

}  // namespace metadkit
