#include "metadkit/trials.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "metadkit/csv.hpp"

namespace metadkit {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kNonFiniteSentinel = "__metadkit_nonfinite__";

const std::vector<std::string>& required_fields() {
  static const std::vector<std::string> fields = {
      "question_id", "domain", "condition", "format", "correct", "nlp"};
  return fields;
}

// JSON has no NaN/Infinity literals, but Python's json module writes them.
// Rewrite bare tokens outside strings into a sentinel string so the record
// parses and is then rejected as NonFiniteConfidence with its line number.
std::string sanitize_nonfinite(const std::string& line) {
  static const std::vector<std::string> tokens = {"-Infinity", "Infinity", "NaN"};
  std::string out;
  out.reserve(line.size());
  bool in_string = false;
  for (std::size_t i = 0; i < line.size();) {
    char ch = line[i];
    if (in_string) {
      out += ch;
      if (ch == '\\' && i + 1 < line.size()) {
        out += line[i + 1];
        i += 2;
        continue;
      }
      if (ch == '"') in_string = false;
      ++i;
      continue;
    }
    if (ch == '"') {
      in_string = true;
      out += ch;
      ++i;
      continue;
    }
    bool replaced = false;
    for (const auto& token : tokens) {
      if (line.compare(i, token.size(), token) == 0) {
        out += '"';
        out += kNonFiniteSentinel;
        out += '"';
        i += token.size();
        replaced = true;
        break;
      }
    }
    if (!replaced) {
      out += ch;
      ++i;
    }
  }
  return out;
}

std::string scalar_to_string(const ordered_json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  if (value.is_number_unsigned()) return std::to_string(value.get<unsigned long long>());
  if (value.is_number_float()) {
    double d = value.get<double>();
    if (d == std::floor(d) && std::abs(d) < 1e15) {
      return std::to_string(static_cast<long long>(d));
    }
    return value.dump();
  }
  if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
  return value.dump();
}

std::optional<bool> parse_bool(const std::string& text) {
  std::string lower;
  for (char ch : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (lower == "true" || lower == "1" || lower == "yes") return true;
  if (lower == "false" || lower == "0" || lower == "no") return false;
  return std::nullopt;
}

std::optional<double> parse_double(const std::string& text) {
  if (text.empty()) return std::nullopt;
  char* end = nullptr;
  double value = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') return std::nullopt;
  return value;
}

std::string key_string(const TrialRecord& r) {
  return "(" + r.question_id + ", " + r.condition + ", " + r.format + ")";
}

// Shared validation used by both the constructor and the loaders.
void check_records(const std::vector<TrialRecord>& records,
                   const std::vector<std::size_t>& line_numbers,
                   std::vector<Issue>& issues) {
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    std::size_t line = i < line_numbers.size() ? line_numbers[i] : i + 1;
    if (!std::isfinite(r.nlp)) {
      issues.push_back({ErrorKind::NonFiniteConfidence, line,
                        "non-finite nlp on line " + std::to_string(line)});
    }
    auto key = std::make_tuple(r.question_id, r.condition, r.format);
    auto [it, inserted] = seen.emplace(key, line);
    if (!inserted) {
      issues.push_back({ErrorKind::DuplicateKey, line,
                        "duplicate key " + key_string(r) + " on line " +
                            std::to_string(line) + " (first seen on line " +
                            std::to_string(it->second) + ")"});
    }
  }
}

void require(bool ok, std::vector<Issue>& issues, const std::string& field,
             std::size_t line, bool& record_ok) {
  if (!ok) {
    issues.push_back({ErrorKind::MissingField, line,
                      "missing field '" + field + "' on line " + std::to_string(line)});
    record_ok = false;
  }
}

TrialSet finish(std::vector<TrialRecord> records, std::vector<std::size_t> lines,
                std::vector<Issue> issues, const std::string& source) {
  check_records(records, lines, issues);
  if (!issues.empty()) {
    std::stable_sort(issues.begin(), issues.end(),
                     [](const Issue& a, const Issue& b) { return a.line < b.line; });
    throw LoadError(std::move(issues));
  }
  return TrialSet(std::move(records), Provenance{source, std::chrono::system_clock::now()});
}

TrialSet parse_jsonl(std::istream& in, const std::string& source) {
  std::vector<TrialRecord> records;
  std::vector<std::size_t> lines;
  std::vector<Issue> issues;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json obj = ordered_json::parse(sanitize_nonfinite(raw), nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      issues.push_back({ErrorKind::ParseError, line_no,
                        "line " + std::to_string(line_no) + " is not a JSON object"});
      continue;
    }
    bool ok = true;
    for (const auto& field : required_fields()) {
      require(obj.contains(field) && !obj[field].is_null(), issues, field, line_no, ok);
    }
    if (!ok) continue;

    TrialRecord r;
    r.question_id = scalar_to_string(obj["question_id"]);
    r.domain = scalar_to_string(obj["domain"]);
    r.condition = scalar_to_string(obj["condition"]);
    r.format = scalar_to_string(obj["format"]);

    const auto& correct = obj["correct"];
    std::optional<bool> flag;
    if (correct.is_boolean()) flag = correct.get<bool>();
    else if (correct.is_number()) flag = correct.get<double>() != 0.0;
    else if (correct.is_string()) flag = parse_bool(correct.get<std::string>());
    if (!flag) {
      issues.push_back({ErrorKind::ParseError, line_no,
                        "field 'correct' on line " + std::to_string(line_no) +
                            " is not a boolean"});
      continue;
    }
    r.correct = *flag;

    const auto& nlp = obj["nlp"];
    if (nlp.is_number()) {
      r.nlp = nlp.get<double>();
    } else if (nlp.is_string()) {
      const auto text = nlp.get<std::string>();
      if (text == kNonFiniteSentinel) {
        r.nlp = std::numeric_limits<double>::quiet_NaN();
      } else if (auto v = parse_double(text)) {
        r.nlp = *v;
      } else {
        issues.push_back({ErrorKind::ParseError, line_no,
                          "field 'nlp' on line " + std::to_string(line_no) +
                              " is not a number"});
        continue;
      }
    } else {
      issues.push_back({ErrorKind::ParseError, line_no,
                        "field 'nlp' on line " + std::to_string(line_no) +
                            " is not a number"});
      continue;
    }
    if (obj.contains("answer_text") && obj["answer_text"].is_string()) {
      r.answer_text = obj["answer_text"].get<std::string>();
    }
    records.push_back(std::move(r));
    lines.push_back(line_no);
  }
  return finish(std::move(records), std::move(lines), std::move(issues), source);
}

TrialSet parse_csv(std::istream& in, const std::string& source) {
  std::vector<Issue> issues;
  auto rows = csv::read(in);
  if (rows.empty()) return TrialSet({}, Provenance{source, std::chrono::system_clock::now()});

  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < rows.front().fields.size(); ++i) {
    column.emplace(rows.front().fields[i], i);
  }
  for (const auto& field : required_fields()) {
    if (!column.count(field)) {
      issues.push_back({ErrorKind::MissingField, rows.front().line,
                        "missing column '" + field + "' in header"});
    }
  }
  if (!issues.empty()) throw LoadError(std::move(issues));

  std::vector<TrialRecord> records;
  std::vector<std::size_t> lines;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto cell = [&](const std::string& name) -> const std::string* {
      auto it = column.find(name);
      if (it == column.end() || it->second >= row.fields.size()) return nullptr;
      return &row.fields[it->second];
    };
    bool ok = true;
    for (const auto& field : required_fields()) {
      const std::string* value = cell(field);
      require(value && !value->empty(), issues, field, row.line, ok);
    }
    if (!ok) continue;

    TrialRecord rec;
    rec.question_id = *cell("question_id");
    rec.domain = *cell("domain");
    rec.condition = *cell("condition");
    rec.format = *cell("format");
    auto flag = parse_bool(*cell("correct"));
    auto nlp = parse_double(*cell("nlp"));
    if (!flag) {
      issues.push_back({ErrorKind::ParseError, row.line,
                        "field 'correct' on line " + std::to_string(row.line) +
                            " is not a boolean"});
      continue;
    }
    if (!nlp) {
      issues.push_back({ErrorKind::ParseError, row.line,
                        "field 'nlp' on line " + std::to_string(row.line) +
                            " is not a number"});
      continue;
    }
    rec.correct = *flag;
    rec.nlp = *nlp;
    if (const std::string* text = cell("answer_text"); text && !text->empty()) {
      rec.answer_text = *text;
    }
    records.push_back(std::move(rec));
    lines.push_back(row.line);
  }
  return finish(std::move(records), std::move(lines), std::move(issues), source);
}

template <typename Get>
std::vector<std::string> distinct(const std::vector<TrialRecord>& records, Get get) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (seen.insert(get(r)).second) out.push_back(get(r));
  }
  return out;
}

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace

TrialSet::TrialSet(std::vector<TrialRecord> records, Provenance provenance)
    : records_(std::move(records)), provenance_(std::move(provenance)) {
  std::vector<Issue> issues;
  check_records(records_, {}, issues);
  if (!issues.empty()) throw LoadError(std::move(issues));
}

std::vector<std::string> TrialSet::domains() const {
  return distinct(records_, [](const TrialRecord& r) { return r.domain; });
}
std::vector<std::string> TrialSet::conditions() const {
  return distinct(records_, [](const TrialRecord& r) { return r.condition; });
}
std::vector<std::string> TrialSet::formats() const {
  return distinct(records_, [](const TrialRecord& r) { return r.format; });
}

std::optional<FileFormat> format_from_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return FileFormat::Jsonl;
  if (ext == ".csv") return FileFormat::Csv;
  return std::nullopt;
}

TrialSet parse_trials(std::istream& in, FileFormat format, const std::string& source) {
  return format == FileFormat::Jsonl ? parse_jsonl(in, source) : parse_csv(in, source);
}

TrialSet load_trials(const std::filesystem::path& path, std::optional<FileFormat> hint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError({{ErrorKind::ParseError, 0, "cannot open " + path.string()}});
  }
  auto format = hint ? hint : format_from_extension(path);
  return parse_trials(in, format.value_or(FileFormat::Jsonl), path.string());
}

void write_jsonl(const TrialSet& trials, std::ostream& out) {
  for (const auto& r : trials) {
    ordered_json obj;
    obj["question_id"] = r.question_id;
    obj["domain"] = r.domain;
    obj["condition"] = r.condition;
    obj["format"] = r.format;
    obj["correct"] = r.correct;
    obj["nlp"] = r.nlp;
    obj["answer_text"] = r.answer_text ? ordered_json(*r.answer_text) : ordered_json(nullptr);
    out << obj.dump() << '\n';
  }
}

void write_csv(const TrialSet& trials, std::ostream& out) {
  out << "question_id,domain,condition,format,correct,nlp,answer_text\n";
  for (const auto& r : trials) {
    out << csv::join({r.question_id, r.domain, r.condition, r.format,
                      r.correct ? "true" : "false", format_real(r.nlp),
                      r.answer_text.value_or("")})
        << '\n';
  }
}

void save_trials(const TrialSet& trials, const std::filesystem::path& path,
                 FileFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write " + path.string());
  if (format == FileFormat::Jsonl) write_jsonl(trials, out);
  else write_csv(trials, out);
}

TrialSet filter(const TrialSet& trials, const Selector& selector,
                std::vector<Warning>* warnings) {
  std::vector<TrialRecord> kept;
  bool domain_seen = false, condition_seen = false, format_seen = false;
  for (const auto& r : trials) {
    domain_seen |= selector.domain && r.domain == *selector.domain;
    condition_seen |= selector.condition && r.condition == *selector.condition;
    format_seen |= selector.format && r.format == *selector.format;
    if (selector.domain && r.domain != *selector.domain) continue;
    if (selector.condition && r.condition != *selector.condition) continue;
    if (selector.format && r.format != *selector.format) continue;
    kept.push_back(r);
  }
  if (warnings) {
    auto warn = [&](const char* what, const std::string& value) {
      warnings->push_back({"UnknownSelectorValue",
                           std::string(what) + " '" + value + "' matches no record"});
    };
    if (selector.domain && !domain_seen) warn("domain", *selector.domain);
    if (selector.condition && !condition_seen) warn("condition", *selector.condition);
    if (selector.format && !format_seen) warn("format", *selector.format);
  }
  return TrialSet(std::move(kept), trials.provenance());
}

PairingReport validate_paired(const TrialSet& a, const TrialSet& b) {
  using Multiset = std::map<std::string, std::size_t>;
  std::map<std::string, Multiset> ids_a, ids_b;
  for (const auto& r : a) ++ids_a[r.domain][r.question_id];
  for (const auto& r : b) ++ids_b[r.domain][r.question_id];

  std::set<std::string> domains;
  for (const auto& [d, _] : ids_a) domains.insert(d);
  for (const auto& [d, _] : ids_b) domains.insert(d);

  PairingReport report;
  static const Multiset empty;
  for (const auto& domain : domains) {
    const Multiset& ma = ids_a.count(domain) ? ids_a.at(domain) : empty;
    const Multiset& mb = ids_b.count(domain) ? ids_b.at(domain) : empty;
    DomainPairing diff{domain, {}, {}};
    for (const auto& [id, count] : ma) {
      auto it = mb.find(id);
      std::size_t other = it == mb.end() ? 0 : it->second;
      report.shared_ids += std::min(count, other);
      for (std::size_t k = other; k < count; ++k) diff.missing.push_back(id);
    }
    for (const auto& [id, count] : mb) {
      auto it = ma.find(id);
      std::size_t other = it == ma.end() ? 0 : it->second;
      for (std::size_t k = other; k < count; ++k) diff.extra.push_back(id);
    }
    if (!diff.missing.empty() || !diff.extra.empty()) {
      report.differences.push_back(std::move(diff));
    }
  }
  report.paired = report.differences.empty();
  return report;
}

}  // namespace metadkit
