#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "metadkit/trials.hpp"

using namespace metadkit;

namespace {

std::string line(const std::string& id, const std::string& domain, int cond,
                 const std::string& fmt, bool correct, const std::string& nlp) {
  return R"({"question_id": ")" + id + R"(", "domain": ")" + domain + R"(", "condition": )" +
         std::to_string(cond) + R"(, "format": ")" + fmt + R"(", "correct": )" +
         (correct ? "true" : "false") + R"(, "nlp": )" + nlp + "}\n";
}

TrialSet parse(const std::string& text, FileFormat f = FileFormat::Jsonl) {
  std::istringstream in(text);
  return parse_trials(in, f);
}

ErrorKind load_error_kind(const std::string& text, std::size_t* first_line = nullptr) {
  try {
    parse(text);
  } catch (const LoadError& e) {
    if (first_line) *first_line = e.issues().front().line;
    return e.kind();
  }
  FAIL("expected a LoadError");
  return ErrorKind::ParseError;
}

TrialSet random_set(std::uint32_t seed, std::size_t n) {
  std::mt19937 rng(seed);
  const char* domains[] = {"Arts", "Science", "History"};
  const char* formats[] = {"f16", "q5_k_m"};
  std::vector<TrialRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    TrialRecord r;
    r.question_id = "q" + std::to_string(i);
    r.domain = domains[rng() % 3];
    r.condition = std::to_string(1 + rng() % 3);
    r.format = formats[rng() % 2];
    r.correct = rng() % 2;
    r.nlp = -std::ldexp(static_cast<double>(rng()), -30);
    if (rng() % 4 == 0) r.answer_text = "Answer, with \"quotes\"\nand a newline";
    records.push_back(r);
  }
  return TrialSet(records);
}

}  // namespace

TEST_SUITE("trials") {

TEST_CASE("four-line JSONL file loads four records") {
  const auto set = parse(line("q1", "Arts", 1, "f16", true, "-0.2") +
                         line("q2", "Arts", 1, "f16", false, "-0.9") +
                         line("q3", "Science", 1, "f16", true, "-0.4") +
                         line("q4", "Science", 1, "f16", false, "-1.1"));
  CHECK(set.size() == 4);
  CHECK(set[2].domain == "Science");
  CHECK(set[0].condition == "1");
  CHECK(set[1].nlp == doctest::Approx(-0.9));
  CHECK(set.domains() == std::vector<std::string>{"Arts", "Science"});
}

TEST_CASE("duplicate (question_id, condition, format) is rejected") {
  std::size_t where = 0;
  const auto kind = load_error_kind(line("q17", "Arts", 1, "f16", true, "-0.2") +
                                        line("q17", "Arts", 1, "f16", false, "-0.3"),
                                    &where);
  CHECK(kind == ErrorKind::DuplicateKey);
  CHECK(where == 2);
  // The same id under another format is a different key.
  CHECK_NOTHROW(parse(line("q17", "Arts", 1, "f16", true, "-0.2") +
                      line("q17", "Arts", 1, "q5_k_m", false, "-0.3")));
}

TEST_CASE("non-finite nlp is reported with its line number") {
  std::size_t where = 0;
  CHECK(load_error_kind(line("q1", "Arts", 1, "f16", true, "-0.2") +
                            line("q2", "Arts", 1, "f16", true, "NaN"),
                        &where) == ErrorKind::NonFiniteConfidence);
  CHECK(where == 2);
  CHECK(load_error_kind(line("q1", "Arts", 1, "f16", true, "-Infinity")) ==
        ErrorKind::NonFiniteConfidence);
}

TEST_CASE("missing fields and malformed lines") {
  CHECK(load_error_kind(R"({"question_id": "q1", "domain": "Arts", "condition": 1, "format": "f16", "correct": true})"
                        "\n") == ErrorKind::MissingField);
  CHECK(load_error_kind("not json\n") == ErrorKind::ParseError);
}

TEST_CASE("all issues of a file are collected in line order") {
  try {
    parse("garbage\n" + line("q1", "Arts", 1, "f16", true, "NaN") +
          line("q1", "Arts", 1, "f16", true, "-1"));
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    REQUIRE(e.issues().size() >= 2);
    for (std::size_t i = 1; i < e.issues().size(); ++i) {
      CHECK(e.issues()[i - 1].line <= e.issues()[i].line);
    }
  }
}

TEST_CASE("empty input is an empty set") {
  CHECK(parse("").empty());
}

TEST_CASE("CSV with the JSONL field names loads the same records") {
  const std::string csv =
      "question_id,domain,condition,format,correct,nlp,answer_text\n"
      "q1,Arts,1,f16,true,-0.25,\"Paris, France\"\n"
      "q2,Arts,1,f16,false,-1.5,\n";
  const auto set = parse(csv, FileFormat::Csv);
  REQUIRE(set.size() == 2);
  CHECK(set[0].answer_text == std::optional<std::string>("Paris, France"));
  CHECK_FALSE(set[1].correct);
  CHECK(set[1].nlp == -1.5);
}

TEST_CASE("filter selects conjunctively and warns on unknown values") {
  const auto set = random_set(3, 300);
  std::vector<Warning> warnings;
  const auto sci = filter(set, Selector{"Science", "1", "f16"}, &warnings);
  CHECK(warnings.empty());
  for (const auto& r : sci) {
    CHECK(r.domain == "Science");
    CHECK(r.condition == "1");
    CHECK(r.format == "f16");
  }
  std::size_t expected = 0;
  for (const auto& r : set) expected += r.domain == "Science" && r.condition == "1" && r.format == "f16";
  CHECK(sci.size() == expected);

  const auto none = filter(set, Selector{"Nonexistent", {}, {}}, &warnings);
  CHECK(none.empty());
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].code == "UnknownSelectorValue");

  CHECK(filter(set, Selector{}).records() == set.records());
}

TEST_CASE("property: filter(filter(S, p), q) == filter(S, p and q)") {
  const auto set = random_set(11, 400);
  const std::vector<std::optional<std::string>> domains = {std::nullopt, "Arts", "Science"};
  const std::vector<std::optional<std::string>> conditions = {std::nullopt, "1", "3"};
  const std::vector<std::optional<std::string>> formats = {std::nullopt, "f16", "q5_k_m"};
  std::vector<Selector> selectors;
  for (const auto& d : domains)
    for (const auto& c : conditions)
      for (const auto& f : formats) selectors.push_back({d, c, f});
  auto conj = [](const std::optional<std::string>& a, const std::optional<std::string>& b)
      -> std::optional<std::optional<std::string>> {
    if (a && b && *a != *b) return std::nullopt;  // contradictory: empty result
    return a ? a : b;
  };
  for (const auto& p : selectors) {
    for (const auto& q : selectors) {
      const auto twice = filter(filter(set, p), q);
      auto d = conj(p.domain, q.domain);
      auto c = conj(p.condition, q.condition);
      auto f = conj(p.format, q.format);
      if (!d || !c || !f) {
        CHECK(twice.empty());
        continue;
      }
      CHECK(twice.records() == filter(set, Selector{*d, *c, *f}).records());
    }
  }
}

TEST_CASE("property: save then load is the identity on records") {
  const auto set = random_set(5, 250);
  const auto dir = std::filesystem::temp_directory_path() / "metadkit_trials_roundtrip";
  std::filesystem::create_directories(dir);
  for (auto fmt : {FileFormat::Jsonl, FileFormat::Csv}) {
    const auto path = dir / (fmt == FileFormat::Jsonl ? "t.jsonl" : "t.csv");
    save_trials(set, path, fmt);
    const auto back = load_trials(path);
    CHECK(back.records() == set.records());
    save_trials(back, path, fmt);
    CHECK(load_trials(path).records() == set.records());
  }
}

TEST_CASE("validate_paired reports per-domain set differences") {
  auto make = [](std::vector<std::string> ids) {
    std::vector<TrialRecord> rs;
    for (const auto& id : ids) rs.push_back({id, "Arts", "1", "f16", true, -1.0, {}});
    return TrialSet(rs);
  };
  const auto a = make({"q1", "q2"});
  const auto b = make({"q1", "q3"});
  const auto report = validate_paired(a, b);
  CHECK_FALSE(report.paired);
  REQUIRE(report.differences.size() == 1);
  CHECK(report.differences[0].missing == std::vector<std::string>{"q2"});
  CHECK(report.differences[0].extra == std::vector<std::string>{"q3"});

  const auto self = validate_paired(a, a);
  CHECK(self.paired);
  CHECK(self.shared_ids == 2);
  CHECK(self.differences.empty());
}

TEST_CASE("property: validate_paired verdict is symmetric") {
  for (std::uint32_t seed = 0; seed < 30; ++seed) {
    std::mt19937 rng(seed);
    auto make = [&] {
      std::vector<TrialRecord> rs;
      for (int i = 0; i < 8; ++i) {
        if (rng() % 3 == 0) continue;
        rs.push_back({"q" + std::to_string(i), i % 2 ? "Arts" : "Science", "1", "f16", true,
                      -1.0, {}});
      }
      return TrialSet(rs);
    };
    const auto a = make();
    const auto b = make();
    CHECK(validate_paired(a, b).paired == validate_paired(b, a).paired);
  }
}

}  // TEST_SUITE
