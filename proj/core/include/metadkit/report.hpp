#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "metadkit/nonparam.hpp"
#include "metadkit/resample.hpp"

namespace metadkit::report {

enum class TableFormat { Markdown, Csv };

struct RenderOptions {
  TableFormat format = TableFormat::Markdown;
  // CSV only: reals at round-trip precision instead of 3 decimals.
  bool full_precision = false;
};

// A cell is either text or a real rendered at the declared precision.
struct Cell {
  enum class Kind { Text, Real, Integer } kind = Kind::Text;
  std::string text;
  double value = 0.0;

  static Cell str(std::string s) { return {Kind::Text, std::move(s), 0.0}; }
  static Cell real(double v) { return {Kind::Real, {}, v}; }
  static Cell integer(long long v) { return {Kind::Integer, {}, static_cast<double>(v)}; }
};

struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
};

std::string render(const Table& table, const RenderOptions& options);

std::string format_real(double value, bool full_precision = false);

// Per-format d', meta-d', M-ratio and M-ratio rank, one row per domain,
// rows ordered by rank under the first format.
Table format_profile_table(const std::vector<DomainProfile>& profiles_a,
                           const std::vector<DomainProfile>& profiles_b);

// Per-format AUROC2 and its rank, rows ordered by rank under the first format.
Table auroc_table(const std::vector<DomainProfile>& profiles_a,
                  const std::vector<DomainProfile>& profiles_b);

// Confidence-interval rule contrasts (hypothesis, contrast, domain, delta,
// CI, result). CSV splits the interval into ci_low/ci_high columns.
Table contrast_table(const std::vector<ContrastResult>& contrasts,
                     const RenderOptions& options);

// TOST contrasts (domain, delta, CI, result).
Table tost_table(const std::vector<ContrastResult>& contrasts, const RenderOptions& options);

// NLP gap, one row per condition, one column per domain.
Table nlp_gap_table(const std::vector<DomainProfile>& profiles);

// Cond, Domain, N, Acc, d', meta-d', M-ratio, NLP gap.
Table full_metrics_table(const std::vector<DomainProfile>& profiles);

// Rank correlations and per-domain rank moves.
Table comparison_table(const FormatComparison& comparison);

struct ReportBundle {
  std::vector<Table> tables;
  std::vector<std::string> notes;
};

// Tables plus a "Reproduction notes" section.
std::string render_bundle(const ReportBundle& bundle, const RenderOptions& options);

// Warnings that belong in the reproduction notes of any profile table.
std::vector<std::string> profile_notes(const std::vector<DomainProfile>& profiles);
std::vector<std::string> contrast_notes(const std::vector<ContrastResult>& contrasts);

// Grouped bar chart (domain groups x one bar per format) as an SVG 1.1
// document. Output carries no timestamps. Throws EmptyInput.
std::string bar_chart_svg(const std::vector<DomainProfile>& profiles, ProfileMetric metric);
void write_bar_chart(const std::vector<DomainProfile>& profiles, ProfileMetric metric,
                     const std::filesystem::path& path);

// Parses a CSV table produced by render() back into rows of strings.
std::vector<std::vector<std::string>> parse_csv_table(const std::string& text);

}  // namespace metadkit::report
