#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace qlens::harness {

/// 9 significant digits, printf %.9g.
std::string format_double(double v);

/// RFC-4180 field: quoted when it holds a comma, quote, CR or LF.
std::string csv_field(std::string_view text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header; throws if absent.
  std::size_t column(std::string_view name) const;
};

std::string to_csv(const CsvTable& table);
/// Every record must have as many fields as the header.
CsvTable parse_csv(std::string_view text);

/// experiment_id, preset, site_scope, kind, bits_w, bits_a, transform, seed,
/// metric, baseline, value, delta
const std::vector<std::string>& result_columns();

}  // namespace qlens::harness
