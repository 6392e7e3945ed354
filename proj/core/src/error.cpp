#include "metadkit/error.hpp"

namespace metadkit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MissingField: return "MissingField";
    case ErrorKind::DuplicateKey: return "DuplicateKey";
    case ErrorKind::NonFiniteConfidence: return "NonFiniteConfidence";
    case ErrorKind::EmptySet: return "EmptySet";
    case ErrorKind::TooFewTrials: return "TooFewTrials";
    case ErrorKind::AlreadyPadded: return "AlreadyPadded";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::ZeroDPrime: return "ZeroDPrime";
    case ErrorKind::OneClassOnly: return "OneClassOnly";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::MixedProfileSet: return "MixedProfileSet";
    case ErrorKind::DomainMismatch: return "DomainMismatch";
    case ErrorKind::UnpairedSets: return "UnpairedSets";
    case ErrorKind::WrongCiLevel: return "WrongCiLevel";
    case ErrorKind::MissingCondition: return "MissingCondition";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::UnsupportedFamily: return "UnsupportedFamily";
    case ErrorKind::IncompleteInput: return "IncompleteInput";
    case ErrorKind::EmptyInput: return "EmptyInput";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message),
      kind_(kind) {}

namespace {

std::string summarize(const std::vector<Issue>& issues) {
  if (issues.empty()) return "no issues";
  std::string out = std::to_string(issues.size()) + " issue(s); first: " +
                    issues.front().message;
  return out;
}

ErrorKind first_kind(const std::vector<Issue>& issues) {
  return issues.empty() ? ErrorKind::ParseError : issues.front().kind;
}

}  // namespace

LoadError::LoadError(std::vector<Issue> issues)
    : Error(first_kind(issues), summarize(issues)), issues_(std::move(issues)) {}

}  // namespace metadkit
