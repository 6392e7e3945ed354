#include "metadkit/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "metadkit/csv.hpp"

namespace metadkit::report {

std::string format_real(double value, bool full_precision) {
  if (std::isnan(value)) return "nan";
  char buf[48];
  if (full_precision) {
    std::snprintf(buf, sizeof buf, "%.17g", value);
  } else {
    std::snprintf(buf, sizeof buf, "%.3f", value);
    if (std::string(buf) == "-0.000") return "0.000";
  }
  return buf;
}

namespace {

std::string cell_text(const Cell& cell, const RenderOptions& options) {
  switch (cell.kind) {
    case Cell::Kind::Text: return cell.text;
    case Cell::Kind::Integer: return std::to_string(static_cast<long long>(cell.value));
    case Cell::Kind::Real:
      return format_real(cell.value,
                         options.full_precision && options.format == TableFormat::Csv);
  }
  return {};
}

std::string md_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '|') out += '\\';
    out += ch;
  }
  return out;
}

const DomainProfile& find_domain(const std::vector<DomainProfile>& profiles,
                                 const std::string& domain, const std::string& side) {
  for (const auto& p : profiles) {
    if (p.domain == domain) return p;
  }
  throw Error(ErrorKind::IncompleteInput, "no " + side + " profile for domain " + domain);
}

std::vector<const DomainProfile*> by_rank(const std::vector<DomainProfile>& profiles,
                                          ProfileMetric metric) {
  std::vector<const DomainProfile*> out;
  for (const auto& p : profiles) out.push_back(&p);
  std::stable_sort(out.begin(), out.end(), [metric](const auto* a, const auto* b) {
    return metric == ProfileMetric::MRatio ? a->rank_m_ratio < b->rank_m_ratio
                                           : a->rank_auroc2 < b->rank_auroc2;
  });
  return out;
}

std::string contrast_label(const ContrastResult& c) {
  return "Cond " + c.condition_a + " - Cond " + c.condition_b;
}

std::string ci_text(const ContrastResult& c) {
  return "[" + format_real(c.ci_low) + ", " + format_real(c.ci_high) + "]";
}

std::string result_text(Decision d) {
  switch (d) {
    case Decision::Supported: return "Supported";
    case Decision::NotSupported: return "Not supported";
    case Decision::Equivalent: return "Equivalent";
    case Decision::NotEquivalent: return "Not equivalent";
  }
  return "";
}

std::string level_text(double level) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%g%%", level * 100.0);
  return buf;
}

}  // namespace

std::string render(const Table& table, const RenderOptions& options) {
  std::ostringstream out;
  if (options.format == TableFormat::Csv) {
    out << csv::join(table.header) << '\n';
    for (const auto& row : table.rows) {
      std::vector<std::string> fields;
      for (const auto& c : row) fields.push_back(cell_text(c, options));
      out << csv::join(fields) << '\n';
    }
    return out.str();
  }
  if (!table.title.empty()) out << "### " << table.title << "\n\n";
  out << '|';
  for (const auto& h : table.header) out << ' ' << md_escape(h) << " |";
  out << "\n|";
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i == 0 ? "---|" : "---:|");
  out << '\n';
  for (const auto& row : table.rows) {
    out << '|';
    for (const auto& c : row) out << ' ' << md_escape(cell_text(c, options)) << " |";
    out << '\n';
  }
  return out.str();
}

Table format_profile_table(const std::vector<DomainProfile>& profiles_a,
                           const std::vector<DomainProfile>& profiles_b) {
  if (profiles_a.empty()) throw Error(ErrorKind::IncompleteInput, "no profiles for format A");
  const std::string fa = profiles_a.front().format;
  const std::string fb = profiles_b.empty() ? std::string("?") : profiles_b.front().format;
  Table t;
  t.title = "M-ratio profiles by format";
  t.header = {"Domain",
              fa + " d'", fa + " meta-d'", fa + " M-ratio", fa + " Rank",
              fb + " d'", fb + " meta-d'", fb + " M-ratio", fb + " Rank"};
  for (const auto* a : by_rank(profiles_a, ProfileMetric::MRatio)) {
    const auto& b = find_domain(profiles_b, a->domain, fb);
    t.rows.push_back({Cell::str(a->domain), Cell::real(a->d_prime), Cell::real(a->meta_d),
                      Cell::real(a->m_ratio), Cell::integer(a->rank_m_ratio),
                      Cell::real(b.d_prime), Cell::real(b.meta_d), Cell::real(b.m_ratio),
                      Cell::integer(b.rank_m_ratio)});
  }
  return t;
}

Table auroc_table(const std::vector<DomainProfile>& profiles_a,
                  const std::vector<DomainProfile>& profiles_b) {
  if (profiles_a.empty()) throw Error(ErrorKind::IncompleteInput, "no profiles for format A");
  const std::string fa = profiles_a.front().format;
  const std::string fb = profiles_b.empty() ? std::string("?") : profiles_b.front().format;
  Table t;
  t.title = "Type-2 AUROC by format";
  t.header = {"Domain", fa + " AUROC2", fa + " Rank", fb + " AUROC2", fb + " Rank"};
  for (const auto* a : by_rank(profiles_a, ProfileMetric::Auroc2)) {
    const auto& b = find_domain(profiles_b, a->domain, fb);
    t.rows.push_back({Cell::str(a->domain), Cell::real(a->auroc2),
                      Cell::integer(a->rank_auroc2), Cell::real(b.auroc2),
                      Cell::integer(b.rank_auroc2)});
  }
  return t;
}

Table contrast_table(const std::vector<ContrastResult>& contrasts,
                     const RenderOptions& options) {
  Table t;
  t.title = "Confirmatory contrasts";
  const bool csv = options.format == TableFormat::Csv;
  double level = 0.95;
  for (const auto& c : contrasts) {
    if (c.decision == Decision::Supported || c.decision == Decision::NotSupported) {
      level = c.ci_level;
      break;
    }
  }
  if (csv) {
    t.header = {"Hypothesis", "Contrast", "Domain", "Delta meta-d'", "ci_low", "ci_high",
                "Result"};
  } else {
    t.header = {"Hypothesis", "Contrast", "Domain", "Delta meta-d'", level_text(level) + " CI",
                "Result"};
  }
  for (const auto& c : contrasts) {
    if (c.decision == Decision::Equivalent || c.decision == Decision::NotEquivalent) continue;
    std::vector<Cell> row{Cell::str(c.hypothesis_id), Cell::str(contrast_label(c)),
                          Cell::str(c.domain), Cell::real(c.delta_hat)};
    if (csv) {
      row.push_back(Cell::real(c.ci_low));
      row.push_back(Cell::real(c.ci_high));
    } else {
      row.push_back(Cell::str(ci_text(c)));
    }
    row.push_back(Cell::str(result_text(c.decision)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table tost_table(const std::vector<ContrastResult>& contrasts, const RenderOptions& options) {
  Table t;
  t.title = "Equivalence (TOST) contrasts";
  const bool csv = options.format == TableFormat::Csv;
  double level = 0.90;
  for (const auto& c : contrasts) {
    if (c.decision == Decision::Equivalent || c.decision == Decision::NotEquivalent) {
      level = c.ci_level;
      break;
    }
  }
  if (csv) {
    t.header = {"Hypothesis", "Domain", "Delta meta-d'", "ci_low", "ci_high", "Result"};
  } else {
    t.header = {"Hypothesis", "Domain", "Delta meta-d'", level_text(level) + " CI", "Result"};
  }
  for (const auto& c : contrasts) {
    if (c.decision != Decision::Equivalent && c.decision != Decision::NotEquivalent) continue;
    std::vector<Cell> row{Cell::str(c.hypothesis_id), Cell::str(c.domain),
                          Cell::real(c.delta_hat)};
    if (csv) {
      row.push_back(Cell::real(c.ci_low));
      row.push_back(Cell::real(c.ci_high));
    } else {
      row.push_back(Cell::str(ci_text(c)));
    }
    row.push_back(Cell::str(result_text(c.decision)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table nlp_gap_table(const std::vector<DomainProfile>& profiles) {
  std::vector<std::string> conditions, domains;
  std::map<std::pair<std::string, std::string>, double> gap;
  for (const auto& p : profiles) {
    if (std::find(conditions.begin(), conditions.end(), p.condition) == conditions.end()) {
      conditions.push_back(p.condition);
    }
    if (std::find(domains.begin(), domains.end(), p.domain) == domains.end()) {
      domains.push_back(p.domain);
    }
    gap.emplace(std::make_pair(p.condition, p.domain), p.nlp_gap);
  }
  Table t;
  t.title = "NLP gap (mean NLP correct - mean NLP incorrect)";
  t.header = {"Condition"};
  t.header.insert(t.header.end(), domains.begin(), domains.end());
  for (const auto& c : conditions) {
    std::vector<Cell> row{Cell::str(c)};
    for (const auto& d : domains) {
      auto it = gap.find({c, d});
      if (it == gap.end()) {
        throw Error(ErrorKind::IncompleteInput, "no NLP gap for condition " + c + ", " + d);
      }
      row.push_back(Cell::real(it->second));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table full_metrics_table(const std::vector<DomainProfile>& profiles) {
  Table t;
  t.title = "Per-condition, per-domain metrics";
  t.header = {"Cond", "Domain", "N", "Acc", "d'", "meta-d'", "M-ratio", "NLP gap"};
  for (const auto& p : profiles) {
    t.rows.push_back({Cell::str(p.condition), Cell::str(p.domain),
                      Cell::integer(static_cast<long long>(p.n)), Cell::real(p.accuracy),
                      Cell::real(p.d_prime), Cell::real(p.meta_d), Cell::real(p.m_ratio),
                      Cell::real(p.nlp_gap)});
  }
  return t;
}

Table comparison_table(const FormatComparison& c) {
  Table t;
  t.title = "Rank moves " + c.format_a + " -> " + c.format_b;
  t.header = {"Domain", "M-ratio rank " + c.format_a, "M-ratio rank " + c.format_b,
              "AUROC2 rank " + c.format_a, "AUROC2 rank " + c.format_b,
              "d' " + c.format_a, "d' " + c.format_b};
  for (const auto& m : c.moves) {
    t.rows.push_back({Cell::str(m.domain), Cell::integer(m.rank_m_ratio_a),
                      Cell::integer(m.rank_m_ratio_b), Cell::integer(m.rank_auroc2_a),
                      Cell::integer(m.rank_auroc2_b), Cell::real(m.d_prime_a),
                      Cell::real(m.d_prime_b)});
  }
  auto rho_cell = [](const std::optional<double>& r) {
    return r ? Cell::real(*r) : Cell::str("undefined");
  };
  t.rows.push_back({Cell::str("Spearman rho"), rho_cell(c.rho_m_ratio), Cell::str(""),
                    rho_cell(c.rho_auroc2), Cell::str(""), Cell::str(""), Cell::str("")});
  return t;
}

std::string render_bundle(const ReportBundle& bundle, const RenderOptions& options) {
  std::ostringstream out;
  const bool csv = options.format == TableFormat::Csv;
  for (std::size_t i = 0; i < bundle.tables.size(); ++i) {
    if (i) out << '\n';
    if (csv) out << "# " << bundle.tables[i].title << '\n';
    out << render(bundle.tables[i], options);
  }
  if (!bundle.notes.empty()) {
    out << '\n' << (csv ? "# Reproduction notes\n" : "### Reproduction notes\n\n");
    for (const auto& n : bundle.notes) out << (csv ? "# " : "- ") << n << '\n';
  }
  return out.str();
}

std::vector<std::string> profile_notes(const std::vector<DomainProfile>& profiles) {
  std::vector<std::string> notes;
  for (const auto& p : profiles) {
    const std::string cell = "(" + p.condition + ", " + p.format + ", " + p.domain + ")";
    if (p.low_dprime_warning) {
      notes.push_back(cell + ": d' = " + format_real(p.d_prime) +
                      " is below 0.5; M-ratio is unstable at low d'");
    }
    if (!p.converged) notes.push_back(cell + ": meta-d' fit did not converge");
    for (const auto& w : p.warnings) {
      if (w.code == "LowDPrime" || w.code == "NoConvergence") continue;
      notes.push_back(cell + ": " + w.code + ": " + w.message);
    }
  }
  return notes;
}

std::vector<std::string> contrast_notes(const std::vector<ContrastResult>& contrasts) {
  std::vector<std::string> notes;
  for (const auto& c : contrasts) {
    const std::string id = c.hypothesis_id + " " + c.domain;
    notes.push_back(id + ": " + std::to_string(c.n_resamples) + " " +
                    std::string(to_string(c.pairing)) + " resamples, seed " +
                    std::to_string(c.seed) + ", " + std::to_string(c.degenerate_resample_count) +
                    " degenerate, " + std::to_string(c.nonconverged_count) + " non-converged");
    if (c.too_many_degenerate) {
      notes.push_back(id + ": more than 1% of resamples were undefined; interval flagged");
    }
    if (c.point_outside_ci) {
      notes.push_back(id + ": point estimate lies outside its percentile interval");
    }
  }
  return notes;
}

namespace {

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string bar_chart_svg(const std::vector<DomainProfile>& profiles, ProfileMetric metric) {
  if (profiles.empty()) throw Error(ErrorKind::EmptyInput, "bar chart needs at least one profile");
  std::vector<std::string> domains, formats;
  std::map<std::pair<std::string, std::string>, double> value;
  for (const auto& p : profiles) {
    if (std::find(domains.begin(), domains.end(), p.domain) == domains.end()) {
      domains.push_back(p.domain);
    }
    if (std::find(formats.begin(), formats.end(), p.format) == formats.end()) {
      formats.push_back(p.format);
    }
    value[{p.domain, p.format}] = metric == ProfileMetric::MRatio ? p.m_ratio : p.auroc2;
  }

  static const char* palette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52",
                                  "#8172b3", "#937860", "#da8bc3", "#8c8c8c"};
  const double bar_w = 28.0, group_gap = 24.0, left = 64.0, right = 20.0, top = 40.0,
               plot_h = 240.0, bottom = 70.0;
  const double group_w = bar_w * static_cast<double>(formats.size());
  const double plot_w = static_cast<double>(domains.size()) * (group_w + group_gap) + group_gap;
  const double width = left + plot_w + right;
  const double height = top + plot_h + bottom;

  double lo = 0.0, hi = 0.0;
  for (const auto& [_, v] : value) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) hi = lo + 1.0;
  hi += 0.1 * (hi - lo);
  auto y_of = [&](double v) { return top + plot_h * (hi - v) / (hi - lo); };

  const std::string label = metric == ProfileMetric::MRatio ? "M-ratio" : "AUROC2";
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(width)
      << "\" height=\"" << num(height) << "\" viewBox=\"0 0 " << num(width) << ' '
      << num(height) << "\">\n"
      << "<title>" << label << " by domain and format</title>\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height)
      << "\" fill=\"white\"/>\n";

  // axes
  svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
      << "\" y2=\"" << num(top + plot_h) << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(y_of(0.0)) << "\" x2=\""
      << num(left + plot_w) << "\" y2=\"" << num(y_of(0.0)) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    svg << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y_of(v) + 4)
        << "\" font-size=\"10\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  svg << "<text x=\"16\" y=\"" << num(top + plot_h / 2) << "\" font-size=\"12\" "
      << "text-anchor=\"middle\" transform=\"rotate(-90 16 " << num(top + plot_h / 2)
      << ")\">" << label << "</text>\n";
  svg << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(height - 12)
      << "\" font-size=\"12\" text-anchor=\"middle\">Domain</text>\n";

  for (std::size_t d = 0; d < domains.size(); ++d) {
    const double x0 = left + group_gap + static_cast<double>(d) * (group_w + group_gap);
    for (std::size_t f = 0; f < formats.size(); ++f) {
      auto it = value.find({domains[d], formats[f]});
      if (it == value.end()) continue;
      const double x = x0 + static_cast<double>(f) * bar_w;
      const double y = std::min(y_of(it->second), y_of(0.0));
      const double h = std::abs(y_of(it->second) - y_of(0.0));
      svg << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(bar_w - 2)
          << "\" height=\"" << num(h) << "\" fill=\"" << palette[f % 8] << "\"><title>"
          << svg_escape(domains[d] + " " + formats[f]) << ": " << format_real(it->second)
          << "</title></rect>\n";
    }
    svg << "<text x=\"" << num(x0 + group_w / 2) << "\" y=\"" << num(top + plot_h + 16)
        << "\" font-size=\"11\" text-anchor=\"middle\">" << svg_escape(domains[d])
        << "</text>\n";
  }
  for (std::size_t f = 0; f < formats.size(); ++f) {
    const double x = left + static_cast<double>(f) * 110.0;
    svg << "<rect x=\"" << num(x) << "\" y=\"12\" width=\"12\" height=\"12\" fill=\""
        << palette[f % 8] << "\"/>\n"
        << "<text x=\"" << num(x + 16) << "\" y=\"22\" font-size=\"11\">"
        << svg_escape(formats[f]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_bar_chart(const std::vector<DomainProfile>& profiles, ProfileMetric metric,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write " + path.string());
  out << bar_chart_svg(profiles, metric);
}

std::vector<std::vector<std::string>> parse_csv_table(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::vector<std::string>> out;
  for (auto& row : csv::read(in)) out.push_back(std::move(row.fields));
  return out;
}

}  // namespace metadkit::report
