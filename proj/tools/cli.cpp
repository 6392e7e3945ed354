#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "metadkit/rng.hpp"
#include "metadkit/synth.hpp"

namespace metadkit::cli {

namespace fs = std::filesystem;

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "trials_path", "n_ratings", "n_bins",        "pad_value",     "seed",
      "n_resamples", "tost_delta", "ci_level",     "tost_ci_level", "binning_scope",
      "pairing",     "output_dir"};
  return keys;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !in.eof()) {
    throw Error(ErrorKind::InvalidConfig, "bad value '" + value + "' for " + key);
  }
  return out;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig:
    case ErrorKind::WrongCiLevel:
    case ErrorKind::UnsupportedFamily:
      return kConfigError;
    case ErrorKind::ZeroDPrime:
    case ErrorKind::OutOfDomain:
    case ErrorKind::ZeroVariance:
      return kNumericalFailure;
    default:
      return kDataError;
  }
}

int report_error(const Error& e, std::ostream& err) {
  if (const auto* load = dynamic_cast<const LoadError*>(&e)) {
    for (const auto& issue : load->issues()) {
      err << "error: " << to_string(issue.kind) << ": " << issue.message << '\n';
    }
  } else {
    err << "error: " << e.what() << '\n';
  }
  return exit_code_for(e.kind());
}

TrialSet load(const RunConfig& config) {
  if (config.trials_path.empty()) {
    throw Error(ErrorKind::InvalidConfig, "no trials file given (--trials)");
  }
  return load_trials(config.trials_path);
}

std::string extension(const RunSettings& s) {
  return s.table_format == report::TableFormat::Csv ? ".csv" : ".md";
}

void emit(const std::string& text, const RunConfig& config, const std::string& name,
          std::ostream& out) {
  out << text;
  if (config.output_dir.empty()) return;
  fs::create_directories(config.output_dir);
  std::ofstream file(fs::path(config.output_dir) / name, std::ios::binary);
  if (!file) throw Error(ErrorKind::InvalidConfig, "cannot write into " + config.output_dir);
  file << text;
}

report::RenderOptions render_options(const RunSettings& s) {
  return {s.table_format, s.full_precision};
}

TrialSet select_format(const TrialSet& trials, const RunSettings& settings,
                       std::ostream& err) {
  if (!settings.format) return trials;
  std::vector<Warning> warnings;
  TrialSet subset = filter(trials, Selector{{}, {}, settings.format}, &warnings);
  for (const auto& w : warnings) err << "warning: " << w.message << '\n';
  return subset;
}

}  // namespace

void apply_config_value(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "trials_path") c.trials_path = value;
  else if (key == "n_ratings") c.n_ratings = parse_number<int>(key, value);
  else if (key == "n_bins") c.n_bins = parse_number<int>(key, value);
  else if (key == "pad_value") c.pad_value = parse_number<double>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "n_resamples") c.n_resamples = parse_number<std::size_t>(key, value);
  else if (key == "tost_delta") c.tost_delta = parse_number<double>(key, value);
  else if (key == "ci_level") c.ci_level = parse_number<double>(key, value);
  else if (key == "tost_ci_level") c.tost_ci_level = parse_number<double>(key, value);
  else if (key == "binning_scope") {
    if (value == "per_cell") c.binning_scope = BinningScope::PerCell;
    else if (value == "global") c.binning_scope = BinningScope::Global;
    else throw Error(ErrorKind::InvalidConfig, "binning_scope must be per_cell or global");
  } else if (key == "pairing") {
    if (value == "paired") c.pairing = Pairing::Paired;
    else if (value == "independent") c.pairing = Pairing::Independent;
    else throw Error(ErrorKind::InvalidConfig, "pairing must be paired or independent");
  } else if (key == "output_dir") c.output_dir = value;
  else throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
}

void parse_config_text(const std::string& text, RunConfig& config) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool bins_set = false, ratings_set = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::InvalidConfig,
                  "config line " + std::to_string(line_no) + " is not 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    apply_config_value(config, key, line.substr(eq + 1));
    bins_set |= key == "n_bins";
    ratings_set |= key == "n_ratings";
  }
  if (ratings_set && !bins_set) config.n_bins = 2 * config.n_ratings;
  if (bins_set && !ratings_set && config.n_bins % 2 == 0) config.n_ratings = config.n_bins / 2;
}

std::string render_config(const RunConfig& c) {
  std::ostringstream out;
  out << "trials_path = " << c.trials_path << '\n'
      << "n_ratings = " << c.n_ratings << '\n'
      << "n_bins = " << c.n_bins << '\n'
      << "pad_value = " << c.pad_value << '\n'
      << "seed = " << c.seed << '\n'
      << "n_resamples = " << c.n_resamples << '\n'
      << "tost_delta = " << c.tost_delta << '\n'
      << "ci_level = " << c.ci_level << '\n'
      << "tost_ci_level = " << c.tost_ci_level << '\n'
      << "binning_scope = " << to_string(c.binning_scope) << '\n'
      << "pairing = " << to_string(c.pairing) << '\n'
      << "output_dir = " << c.output_dir << '\n';
  return out.str();
}

void validate(const RunConfig& c) {
  if (c.n_ratings < 2) throw Error(ErrorKind::InvalidConfig, "n_ratings must be >= 2");
  if (c.n_bins != 2 * c.n_ratings) {
    throw Error(ErrorKind::InvalidConfig, "n_bins must equal 2 * n_ratings");
  }
  if (c.n_resamples < 1) throw Error(ErrorKind::InvalidConfig, "n_resamples must be >= 1");
  if (!(c.tost_delta > 0.0)) throw Error(ErrorKind::InvalidConfig, "tost_delta must be > 0");
  if (!(c.pad_value >= 0.0)) throw Error(ErrorKind::InvalidConfig, "pad_value must be >= 0");
  for (double level : {c.ci_level, c.tost_ci_level}) {
    if (!(level > 0.0 && level < 1.0)) {
      throw Error(ErrorKind::InvalidConfig, "confidence levels must lie in (0, 1)");
    }
  }
}

AnalysisOptions analysis_options(const RunConfig& c) {
  AnalysisOptions o;
  o.scale = RatingScale(c.n_ratings);
  o.pad_value = c.pad_value;
  o.binning_scope = c.binning_scope;
  return o;
}

int cmd_validate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const TrialSet trials = load(config);
    if (trials.empty()) {
      err << "error: EmptySet: " << config.trials_path << " contains no records\n";
      return kDataError;
    }
    std::map<std::string, std::size_t> per_domain;
    std::map<std::tuple<std::string, std::string, std::string>, std::size_t> per_cell;
    for (const auto& r : trials) {
      ++per_domain[r.domain];
      ++per_cell[{r.condition, r.format, r.domain}];
    }
    out << "records: " << trials.size() << '\n';
    out << "domains:\n";
    for (const auto& [d, n] : per_domain) out << "  " << d << ": " << n << '\n';
    out << "cells (condition, format, domain):\n";
    for (const auto& [key, n] : per_cell) {
      out << "  " << std::get<0>(key) << ", " << std::get<1>(key) << ", " << std::get<2>(key)
          << ": " << n << '\n';
    }
    return kSuccess;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_diagnose(const RunConfig& config, const RunSettings& settings, std::ostream& out,
                 std::ostream& err) {
  try {
    validate(config);
    const TrialSet trials = select_format(load(config), settings, err);
    std::vector<Warning> warnings;
    const auto profiles = diagnose(trials, analysis_options(config), &warnings);

    report::ReportBundle bundle;
    bundle.tables.push_back(report::full_metrics_table(profiles));

    report::Table ranks;
    ranks.title = "Rank profiles";
    ranks.header = {"Cond", "Format", "Domain", "AUROC2", "AUROC2 rank", "M-ratio",
                    "M-ratio rank"};
    for (const auto& p : profiles) {
      ranks.rows.push_back({report::Cell::str(p.condition), report::Cell::str(p.format),
                            report::Cell::str(p.domain), report::Cell::real(p.auroc2),
                            report::Cell::integer(p.rank_auroc2), report::Cell::real(p.m_ratio),
                            report::Cell::integer(p.rank_m_ratio)});
    }
    bundle.tables.push_back(std::move(ranks));

    for (const auto& format : trials.formats()) {
      std::vector<DomainProfile> subset;
      for (const auto& p : profiles) {
        if (p.format == format) subset.push_back(p);
      }
      auto table = report::nlp_gap_table(subset);
      table.title += " [" + format + "]";
      bundle.tables.push_back(std::move(table));
    }

    // Format comparison tables for every condition observed under several formats.
    const auto formats = trials.formats();
    for (const auto& condition : trials.conditions()) {
      std::vector<std::string> present;
      for (const auto& f : formats) {
        if (!select_profiles(profiles, condition, f).empty()) present.push_back(f);
      }
      if (present.size() < 2) continue;
      const auto a = select_profiles(profiles, condition, present[0]);
      const auto b = select_profiles(profiles, condition, present[1]);
      auto t2 = report::format_profile_table(a, b);
      t2.title += " [condition " + condition + "]";
      auto t3 = report::auroc_table(a, b);
      t3.title += " [condition " + condition + "]";
      bundle.tables.push_back(std::move(t2));
      bundle.tables.push_back(std::move(t3));
    }

    bundle.notes = report::profile_notes(profiles);
    for (const auto& w : warnings) {
      if (w.code == "RankTie") bundle.notes.push_back(w.message);
    }
    bundle.notes.push_back("binning scope: " + std::string(to_string(config.binning_scope)) +
                           "; " + std::to_string(config.n_bins) + " quantile bins; padding " +
                           report::format_real(config.pad_value));

    emit(report::render_bundle(bundle, render_options(settings)), config,
         "diagnose" + extension(settings), out);
    if (!config.output_dir.empty()) {
      report::write_bar_chart(profiles, ProfileMetric::MRatio,
                              fs::path(config.output_dir) / "m_ratio.svg");
      report::write_bar_chart(profiles, ProfileMetric::Auroc2,
                              fs::path(config.output_dir) / "auroc2.svg");
    }
    const bool all_converged = std::all_of(profiles.begin(), profiles.end(),
                                           [](const DomainProfile& p) { return p.converged; });
    return all_converged ? kSuccess : kNumericalFailure;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_compare_formats(const RunConfig& config, const RunSettings& settings,
                        std::ostream& out, std::ostream& err) {
  try {
    validate(config);
    const TrialSet trials = load(config);
    const auto formats = trials.formats();
    const std::string fa = settings.format_a.value_or(formats.size() > 0 ? formats[0] : "");
    const std::string fb = settings.format_b.value_or(formats.size() > 1 ? formats[1] : fa);
    if (fa.empty() || fb.empty()) {
      throw Error(ErrorKind::InvalidConfig, "need two formats (--format-a, --format-b)");
    }

    std::string condition;
    if (settings.condition) {
      condition = *settings.condition;
    } else {
      for (const auto& c : trials.conditions()) {
        if (!filter(trials, Selector{{}, c, fa}).empty() &&
            !filter(trials, Selector{{}, c, fb}).empty()) {
          condition = c;
          break;
        }
      }
    }
    if (condition.empty()) {
      throw Error(ErrorKind::MissingCondition,
                  "no condition observed under both " + fa + " and " + fb);
    }

    const TrialSet side_a = filter(trials, Selector{{}, condition, fa});
    const TrialSet side_b = filter(trials, Selector{{}, condition, fb});
    if (side_a.empty() || side_b.empty()) {
      throw Error(ErrorKind::MissingCondition,
                  "condition " + condition + " lacks trials under " + fa + " or " + fb);
    }
    const auto options = analysis_options(config);
    std::vector<Warning> warnings;
    const auto a = diagnose(side_a, options, &warnings);
    const auto b = diagnose(side_b, options, &warnings);
    const auto comparison = compare_formats(a, b);

    report::ReportBundle bundle;
    bundle.tables.push_back(report::format_profile_table(a, b));
    bundle.tables.push_back(report::auroc_table(a, b));
    bundle.tables.push_back(report::comparison_table(comparison));

    const auto pairing = validate_paired(side_a, side_b);
    bundle.notes.push_back("condition " + condition + ": " + fa + " vs " + fb + ", " +
                           std::to_string(pairing.shared_ids) + " shared question ids, " +
                           (pairing.paired ? "identical question sets"
                                           : "question sets differ"));
    for (const auto& d : pairing.differences) {
      bundle.notes.push_back(d.domain + ": " + std::to_string(d.missing.size()) +
                             " ids only under " + fa + ", " + std::to_string(d.extra.size()) +
                             " only under " + fb);
    }
    bundle.notes.push_back(
        "rho is the Spearman correlation (average ranks) of the per-domain metric values; "
        "it is reported as computed, with no rounding to a reference value");
    for (const auto& n : comparison.notes) bundle.notes.push_back(n);
    auto notes_a = report::profile_notes(a);
    auto notes_b = report::profile_notes(b);
    bundle.notes.insert(bundle.notes.end(), notes_a.begin(), notes_a.end());
    bundle.notes.insert(bundle.notes.end(), notes_b.begin(), notes_b.end());
    for (const auto& w : warnings) {
      if (w.code == "RankTie") bundle.notes.push_back(w.message);
    }

    emit(report::render_bundle(bundle, render_options(settings)), config,
         "compare_formats" + extension(settings), out);
    if (!config.output_dir.empty()) {
      auto both = a;
      both.insert(both.end(), b.begin(), b.end());
      report::write_bar_chart(both, ProfileMetric::MRatio,
                              fs::path(config.output_dir) / "m_ratio_by_format.svg");
      report::write_bar_chart(both, ProfileMetric::Auroc2,
                              fs::path(config.output_dir) / "auroc2_by_format.svg");
    }
    return kSuccess;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_confirm(const RunConfig& config, const RunSettings& settings, std::ostream& out,
                std::ostream& err) {
  try {
    validate(config);
    if (config.binning_scope != BinningScope::PerCell) {
      throw Error(ErrorKind::InvalidConfig,
                  "confirm re-bins within each resampled domain; binning_scope must be per_cell");
    }
    TrialSet trials = select_format(load(config), settings, err);
    const auto formats = trials.formats();
    if (formats.size() > 1) {
      throw Error(ErrorKind::InvalidConfig,
                  "trials span several formats; choose one with --format");
    }

    SuiteOptions options;
    options.n_resamples = config.n_resamples;
    options.seed = config.seed;
    options.workers = settings.workers;
    options.pairing = config.pairing;
    options.analysis = analysis_options(config);
    const auto specs =
        confirmatory_hypotheses(config.tost_delta, config.ci_level, config.tost_ci_level);
    const auto results = run_hypothesis_suite(trials, specs, options);

    const auto ro = render_options(settings);
    report::ReportBundle bundle;
    bundle.tables.push_back(report::contrast_table(results, ro));
    bundle.tables.push_back(report::tost_table(results, ro));
    bundle.notes.push_back(std::to_string(config.n_resamples) + " " +
                           std::string(to_string(config.pairing)) +
                           " question-level resamples per contrast, seed " +
                           std::to_string(config.seed) + ", percentile intervals, RNG " +
                           std::string(kRngContract));
    bundle.notes.push_back("TOST margin " + report::format_real(config.tost_delta) +
                           " with a " + report::format_real(config.tost_ci_level) +
                           " interval");
    auto notes = report::contrast_notes(results);
    bundle.notes.insert(bundle.notes.end(), notes.begin(), notes.end());
    const bool all_null = std::none_of(results.begin(), results.end(), [](const auto& r) {
      return r.decision == Decision::Supported || r.decision == Decision::Equivalent;
    });
    bundle.notes.push_back(all_null ? "all hypotheses null" : "at least one hypothesis supported");

    emit(report::render_bundle(bundle, ro), config, "confirm" + extension(settings), out);

    for (const auto& r : results) {
      if (static_cast<double>(r.nonconverged_count) >
          kDegenerateAlarmFraction * static_cast<double>(r.n_resamples)) {
        err << "error: " << r.hypothesis_id << " " << r.domain
            << ": too many non-converged resample fits\n";
        return kNumericalFailure;
      }
    }
    return kSuccess;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_synth(const std::string& synth_config_path, const std::string& out_path,
              std::ostream& out, std::ostream& err) {
  try {
    const auto blocks = load_synth_configs(synth_config_path);
    const TrialSet trials = generate(blocks);
    if (out_path.empty() || out_path == "-") {
      write_jsonl(trials, out);
    } else {
      if (auto parent = fs::path(out_path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
      }
      save_trials(trials, out_path, format_from_extension(out_path).value_or(FileFormat::Jsonl));
    }
    return kSuccess;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

namespace {

struct FlagSpec {
  const char* names;
  const char* key;
  const char* help;
};

const std::vector<FlagSpec>& plan_flags() {
  static const std::vector<FlagSpec> flags = {
      {"--trials,--trials_path", "trials_path", "Trial file (JSONL or CSV)"},
      {"--nratings,--n_ratings", "n_ratings", "Ratings per response side"},
      {"--bins,--n_bins", "n_bins", "Quantile bins (2 * n_ratings)"},
      {"--pad_value", "pad_value", "Log-linear correction added to every cell"},
      {"--seed", "seed", "Bootstrap seed"},
      {"--resamples,--n_resamples", "n_resamples", "Bootstrap resamples"},
      {"--delta,--tost_delta", "tost_delta", "TOST equivalence margin"},
      {"--ci_level", "ci_level", "Confirmatory interval level"},
      {"--tost_ci_level", "tost_ci_level", "TOST interval level"},
      {"--binning_scope", "binning_scope", "per_cell or global"},
      {"--pairing", "pairing", "paired or independent"},
      {"--out,--output_dir", "output_dir", "Directory for report files"},
  };
  return flags;
}

struct PlanOverrides {
  std::string config_path;
  std::map<std::string, std::string> values;
};

void add_plan_options(CLI::App* sub, PlanOverrides& overrides) {
  sub->add_option("--config", overrides.config_path, "Run configuration file");
  for (const auto& flag : plan_flags()) {
    sub->add_option_function<std::string>(
        flag.names,
        [&overrides, key = std::string(flag.key)](const std::string& v) {
          overrides.values[key] = v;
        },
        flag.help);
  }
}

RunConfig resolve(const PlanOverrides& overrides) {
  RunConfig config;
  if (!overrides.config_path.empty()) {
    std::ifstream in(overrides.config_path);
    if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open " + overrides.config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    parse_config_text(buf.str(), config);
  }
  for (const auto& [key, value] : overrides.values) apply_config_value(config, key, value);
  const bool ratings = overrides.values.count("n_ratings") > 0;
  const bool bins = overrides.values.count("n_bins") > 0;
  if (ratings && !bins) config.n_bins = 2 * config.n_ratings;
  if (bins && !ratings && config.n_bins % 2 == 0) config.n_ratings = config.n_bins / 2;
  validate(config);
  return config;
}

unsigned default_workers() {
  if (const char* env = std::getenv("METADKIT_WORKERS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"metadkit: domain-level metacognitive diagnostics from trial records"};
  app.require_subcommand(1);

  PlanOverrides overrides;
  RunSettings settings;
  settings.workers = default_workers();
  std::string table_format = "markdown";
  std::string format, condition, format_a, format_b;
  std::string synth_config, synth_out;

  auto add_render = [&](CLI::App* sub) {
    sub->add_option("--table-format", table_format, "markdown or csv")
        ->check(CLI::IsMember({"markdown", "csv"}));
    sub->add_flag("--full-precision", settings.full_precision,
                  "CSV reals at round-trip precision");
  };

  auto* validate_cmd = app.add_subcommand("validate", "Load and validate a trial file");
  add_plan_options(validate_cmd, overrides);

  auto* diagnose_cmd = app.add_subcommand("diagnose", "Per-domain metric profiles");
  add_plan_options(diagnose_cmd, overrides);
  add_render(diagnose_cmd);
  diagnose_cmd->add_option("--format", format, "Only trials with this format value");

  auto* compare_cmd = app.add_subcommand("compare-formats", "Profile stability across formats");
  add_plan_options(compare_cmd, overrides);
  add_render(compare_cmd);
  compare_cmd->add_option("--format-a", format_a, "First format (default: first seen)");
  compare_cmd->add_option("--format-b", format_b, "Second format (default: second seen)");
  compare_cmd->add_option("--condition", condition, "Condition to compare");

  auto* confirm_cmd = app.add_subcommand("confirm", "Bootstrap hypothesis suite H1-H4");
  add_plan_options(confirm_cmd, overrides);
  add_render(confirm_cmd);
  confirm_cmd->add_option("--format", format, "Only trials with this format value");
  confirm_cmd->add_option("--workers", settings.workers,
                          "Resample worker threads (default $METADKIT_WORKERS or 1)")
      ->check(CLI::PositiveNumber);

  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic trials");
  synth_cmd->add_option("synth_config", synth_config, "Synthetic config (JSON)")->required();
  synth_cmd->add_option("--out", synth_out, "Output trial file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? kSuccess : kConfigError;
  }

  settings.table_format =
      table_format == "csv" ? report::TableFormat::Csv : report::TableFormat::Markdown;
  if (!format.empty()) settings.format = format;
  if (!condition.empty()) settings.condition = condition;
  if (!format_a.empty()) settings.format_a = format_a;
  if (!format_b.empty()) settings.format_b = format_b;

  if (synth_cmd->parsed()) return cmd_synth(synth_config, synth_out, out, err);

  RunConfig config;
  try {
    config = resolve(overrides);
  } catch (const Error& e) {
    return report_error(e, err);
  }
  if (validate_cmd->parsed()) return cmd_validate(config, out, err);
  if (diagnose_cmd->parsed()) return cmd_diagnose(config, settings, out, err);
  if (compare_cmd->parsed()) return cmd_compare_formats(config, settings, out, err);
  if (confirm_cmd->parsed()) return cmd_confirm(config, settings, out, err);
  return kConfigError;
}

}  // namespace metadkit::cli
