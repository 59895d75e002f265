#include "qlens/harness/csv.hpp"

#include <cstdio>

#include "qlens/error.hpp"

namespace qlens::harness {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char ch : text) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  fail(ErrorKind::kInvalidArgument, "CSV has no column '" + std::string(name) + "'");
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  const auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_field(fields[i]);
    }
    out += "\r\n";
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return out;
}

CsvTable parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, at_start = true, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    if (ch == '"' && at_start) {
      quoted = true;
      at_start = false;
      any = true;
    } else if (ch == ',') {
      record.push_back(std::move(field));
      field.clear();
      at_start = true;
      any = true;
    } else if (ch == '\r' || ch == '\n') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      field.clear();
      record.clear();
      at_start = true;
      any = false;
    } else {
      field += ch;
      at_start = false;
      any = true;
    }
  }
  require(!quoted, ErrorKind::kUnexpectedEof, "unterminated quoted CSV field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  require(!records.empty(), ErrorKind::kEmptyInput, "CSV has no header");
  CsvTable t;
  t.header = std::move(records.front());
  for (std::size_t i = 1; i < records.size(); ++i) {
    require(records[i].size() == t.header.size(), ErrorKind::kShapeMismatch,
            "CSV record " + std::to_string(i) + " has " + std::to_string(records[i].size()) +
                " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols = {"experiment_id", "preset", "site_scope", "kind",
                                                "bits_w",        "bits_a", "transform",  "seed",
                                                "metric",        "baseline", "value",    "delta"};
  return cols;
}

}  // namespace qlens::harness
