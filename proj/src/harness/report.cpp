#include "qlens/harness/report.hpp"

#include <cmath>
#include <map>
#include <tuple>

#include "qlens/error.hpp"
#include "qlens/io_util.hpp"

namespace qlens::harness {

namespace fs = std::filesystem;

namespace {

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == s.size() && !s.empty(), ErrorKind::kInvalidArgument, "not a number in results CSV: '" + s + "'");
  return v;
}

struct Acc {
  double base = 0;
  std::vector<double> values, deltas;
};

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string label(const SummaryRow& r) {
  std::string s = r.kind;
  if (r.transform != "identity" && r.transform != "none") s += " " + r.transform;
  if (r.site_scope != "all") s += " [" + r.site_scope + "]";
  return s;
}

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<CsvTable>& tables) {
  std::vector<SummaryRow> rows;
  std::vector<Acc> accs;
  std::map<std::vector<std::string>, std::size_t> index;
  for (const auto& t : tables) {
    const std::size_t c_id = t.column("experiment_id"), c_pr = t.column("preset"), c_sc = t.column("site_scope"),
                      c_k = t.column("kind"), c_bw = t.column("bits_w"), c_ba = t.column("bits_a"),
                      c_tr = t.column("transform"), c_m = t.column("metric"), c_b = t.column("baseline"),
                      c_v = t.column("value"), c_d = t.column("delta");
    for (const auto& r : t.rows) {
      std::vector<std::string> key = {r[c_id], r[c_pr], r[c_sc], r[c_k], r[c_bw], r[c_ba], r[c_tr], r[c_m]};
      auto [it, fresh] = index.try_emplace(key, rows.size());
      if (fresh) {
        rows.push_back({r[c_id], r[c_pr], r[c_sc], r[c_k], r[c_bw], r[c_ba], r[c_tr], r[c_m]});
        accs.emplace_back();
      }
      Acc& a = accs[it->second];
      a.base += to_double(r[c_b]);
      a.values.push_back(to_double(r[c_v]));
      a.deltas.push_back(to_double(r[c_d]));
    }
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Acc& a = accs[i];
    rows[i].n = a.values.size();
    rows[i].baseline_mean = a.base / static_cast<double>(a.values.size());
    rows[i].value_mean = mean_of(a.values);
    rows[i].value_std = sample_std(a.values);
    rows[i].delta_mean = mean_of(a.deltas);
    rows[i].delta_std = sample_std(a.deltas);
  }
  return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  CsvTable t;
  t.header = {"experiment_id", "preset",     "site_scope", "kind",      "bits_w",     "bits_a",    "transform",
              "metric",        "n",          "baseline_mean", "value_mean", "value_std", "delta_mean", "delta_std"};
  for (const auto& r : rows)
    t.rows.push_back({r.experiment_id, r.preset, r.site_scope, r.kind, r.bits_w, r.bits_a, r.transform, r.metric,
                      std::to_string(r.n), format_double(r.baseline_mean), format_double(r.value_mean),
                      format_double(r.value_std), format_double(r.delta_mean), format_double(r.delta_std)});
  return to_csv(t);
}

std::string summary_markdown(const std::vector<SummaryRow>& rows) {
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<const SummaryRow*>> groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.experiment_id, r.metric);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::string out;
  for (const auto& key : order) {
    if (!out.empty()) out += "\n";
    out += "### " + key.first + " / " + key.second + "\n\n";
    out += "| setting | W | A | n | baseline | value | delta |\n";
    out += "|---|---|---|---|---|---|---|\n";
    for (const auto* r : groups[key]) {
      out += "| " + label(*r) + " | " + r->bits_w + " | " + r->bits_a + " | " + std::to_string(r->n) + " | " +
             format_double(r->baseline_mean) + " | " + format_double(r->value_mean) + " ± " +
             format_double(r->value_std) + " | " + format_double(r->delta_mean) + " ± " +
             format_double(r->delta_std) + " |\n";
    }
  }
  return out;
}

std::vector<fs::path> write_report(const std::vector<SummaryRow>& rows, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec && fs::is_directory(out_dir), ErrorKind::kIo, "cannot create report directory '" + out_dir.string() + "'");
  std::vector<fs::path> written = {out_dir / "summary.csv", out_dir / "summary.md"};
  write_file_atomic(written[0], summary_csv(rows));
  write_file_atomic(written[1], summary_markdown(rows));

  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<const SummaryRow*>> groups;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.experiment_id, r.metric);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  for (const auto& key : order) {
    const auto& g = groups[key];
    std::string body = "# " + key.first + " " + key.second + "\n";
    bool numeric = true;
    for (const auto* r : g) numeric = numeric && r->kind.rfind("alpha:", 0) == 0 && r->kind.back() == 'x';
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!numeric) body += "# " + std::to_string(i) + " " + label(*g[i]) + "\n";
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      std::string x = std::to_string(i);
      if (numeric) x = g[i]->kind.substr(6, g[i]->kind.size() - 7);
      body += x + " " + format_double(g[i]->value_mean) + "\n";
    }
    std::string name = key.first + "_" + key.second + ".dat";
    for (char& ch : name)
      if (ch == '/' || ch == ' ') ch = '_';
    written.push_back(out_dir / name);
    write_file_atomic(written.back(), body);
  }
  return written;
}

}  // namespace qlens::harness
