#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "metadkit/error.hpp"

namespace metadkit {

// One question's outcome under one (condition, format). `nlp` is the mean
// token log-probability of the generated answer, in nats per token.
struct TrialRecord {
  std::string question_id;
  std::string domain;
  std::string condition;
  std::string format;
  bool correct = false;
  double nlp = 0.0;
  std::optional<std::string> answer_text;

  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

enum class FileFormat { Jsonl, Csv };

struct Provenance {
  std::string source;
  std::chrono::system_clock::time_point loaded_at{};
};

// Ordered, validated collection of trial records. Record order is the input
// order and is semantically significant: quantile binning breaks confidence
// ties by it. Immutable once constructed.
class TrialSet {
 public:
  TrialSet() = default;

  // Validates every record (finite nlp, unique (question_id, condition,
  // format)); throws LoadError listing all violations.
  explicit TrialSet(std::vector<TrialRecord> records, Provenance provenance = {});

  const std::vector<TrialRecord>& records() const noexcept { return records_; }
  const Provenance& provenance() const noexcept { return provenance_; }

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const TrialRecord& operator[](std::size_t i) const { return records_[i]; }
  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  // Distinct values in first-appearance order.
  std::vector<std::string> domains() const;
  std::vector<std::string> conditions() const;
  std::vector<std::string> formats() const;

 private:
  std::vector<TrialRecord> records_;
  Provenance provenance_;
};

std::optional<FileFormat> format_from_extension(const std::filesystem::path& path);

// Loads a JSONL or CSV trial file. When `hint` is empty the format is taken
// from the extension (.jsonl/.json -> JSONL, .csv -> CSV). An empty file is a
// valid, empty TrialSet.
TrialSet load_trials(const std::filesystem::path& path,
                     std::optional<FileFormat> hint = std::nullopt);
TrialSet parse_trials(std::istream& in, FileFormat format,
                      const std::string& source = "<stream>");

void write_jsonl(const TrialSet& trials, std::ostream& out);
void write_csv(const TrialSet& trials, std::ostream& out);
void save_trials(const TrialSet& trials, const std::filesystem::path& path,
                 FileFormat format);

// Conjunctive selectors; an absent selector matches everything.
struct Selector {
  std::optional<std::string> domain;
  std::optional<std::string> condition;
  std::optional<std::string> format;
};

// Order-preserving subset. A selector value that matches no record adds an
// UnknownSelectorValue warning; the empty result is still returned.
TrialSet filter(const TrialSet& trials, const Selector& selector,
                std::vector<Warning>* warnings = nullptr);

struct DomainPairing {
  std::string domain;
  std::vector<std::string> missing;  // ids in a, absent from b
  std::vector<std::string> extra;    // ids in b, absent from a
};

struct PairingReport {
  bool paired = false;
  std::size_t shared_ids = 0;
  std::vector<DomainPairing> differences;  // domains with any asymmetry
};

// Compares the multiset of question ids per domain.
PairingReport validate_paired(const TrialSet& a, const TrialSet& b);

}  // namespace metadkit
