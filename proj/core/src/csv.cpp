#include "metadkit/csv.hpp"

#include "metadkit/error.hpp"

namespace metadkit::csv {

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::string join(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += escape(fields[i]);
  }
  return out;
}

std::vector<Row> read(std::istream& in) {
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    Row row;
    row.line = line_no;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    for (;;) {
      if (i == line.size()) {
        if (!quoted) break;
        // quoted field continues on the next physical line
        std::string next;
        if (!std::getline(in, next)) {
          throw Error(ErrorKind::ParseError,
                      "unterminated quoted field starting on line " +
                          std::to_string(row.line));
        }
        ++line_no;
        if (!next.empty() && next.back() == '\r') next.pop_back();
        field += '\n';
        line = std::move(next);
        i = 0;
        continue;
      }
      char ch = line[i++];
      if (quoted) {
        if (ch == '"') {
          if (i < line.size() && line[i] == '"') {
            field += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        row.fields.push_back(std::move(field));
        field.clear();
      } else {
        field += ch;
      }
    }
    row.fields.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace metadkit::csv
