#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qlens/harness/csv.hpp"

namespace qlens::harness {

/// Aggregate of all rows sharing every CSV coordinate except the seed.
struct SummaryRow {
  std::string experiment_id;
  std::string preset;
  std::string site_scope;
  std::string kind;
  std::string bits_w;
  std::string bits_a;
  std::string transform;
  std::string metric;
  std::size_t n = 0;
  double baseline_mean = 0;
  double value_mean = 0;
  double value_std = 0;  // sample standard deviation, 0 for n = 1
  double delta_mean = 0;
  double delta_std = 0;
};

/// Groups in order of first appearance.
std::vector<SummaryRow> summarize(const std::vector<CsvTable>& tables);

std::string summary_csv(const std::vector<SummaryRow>& rows);
/// Markdown table with value and delta as mean ± std.
std::string summary_markdown(const std::vector<SummaryRow>& rows);

/// Writes summary.csv, summary.md and one `<experiment>_<metric>.dat` per
/// (experiment, metric): two columns, x and mean value. x is the numeric
/// alpha for scale sweeps and the setting ordinal otherwise, with the setting
/// names listed in leading comment lines.
std::vector<std::filesystem::path> write_report(const std::vector<SummaryRow>& rows,
                                                const std::filesystem::path& out_dir);

}  // namespace qlens::harness
