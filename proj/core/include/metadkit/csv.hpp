#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace metadkit::csv {

// RFC 4180 style: fields containing a comma, quote, CR or LF are quoted and
// embedded quotes doubled.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

struct Row {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// Reads all records; quoted fields may span lines. Blank lines are skipped.
std::vector<Row> read(std::istream& in);

}  // namespace metadkit::csv
