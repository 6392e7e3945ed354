#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "metadkit/pipeline.hpp"
#include "metadkit/report.hpp"
#include "metadkit/resample.hpp"

namespace metadkit::cli {

enum ExitCode : int {
  kSuccess = 0,
  kDataError = 1,
  kConfigError = 2,
  kNumericalFailure = 3,
};

// Frozen analysis plan. The config file holds exactly these keys as
// `key = value` lines (`#` starts a comment); every key can be overridden by
// the same-named command-line flag.
struct RunConfig {
  std::string trials_path;
  int n_ratings = 4;
  int n_bins = 8;
  double pad_value = 0.5;
  std::uint64_t seed = 42;
  std::size_t n_resamples = 10000;
  double tost_delta = 0.17;
  double ci_level = 0.95;      // confirmatory contrasts
  double tost_ci_level = 0.90; // equivalence contrasts
  BinningScope binning_scope = BinningScope::PerCell;
  Pairing pairing = Pairing::Paired;
  std::string output_dir;
};

// Invocation settings that are not part of the frozen plan.
struct RunSettings {
  unsigned workers = 1;
  report::TableFormat table_format = report::TableFormat::Markdown;
  bool full_precision = false;
  std::optional<std::string> format;  // trial `format` selector
  std::optional<std::string> condition;
  std::optional<std::string> format_a;
  std::optional<std::string> format_b;
};

const std::vector<std::string>& config_keys();

// Applies `key = value` lines onto `config`. Throws InvalidConfig.
void parse_config_text(const std::string& text, RunConfig& config);
void apply_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string render_config(const RunConfig& config);

// Throws InvalidConfig when invariants (n_bins = 2 * n_ratings, ...) fail.
void validate(const RunConfig& config);

AnalysisOptions analysis_options(const RunConfig& config);

int cmd_validate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_diagnose(const RunConfig& config, const RunSettings& settings, std::ostream& out,
                 std::ostream& err);
int cmd_compare_formats(const RunConfig& config, const RunSettings& settings,
                        std::ostream& out, std::ostream& err);
int cmd_confirm(const RunConfig& config, const RunSettings& settings, std::ostream& out,
                std::ostream& err);
int cmd_synth(const std::string& synth_config_path, const std::string& out_path,
              std::ostream& out, std::ostream& err);

// Full command-line entry point (argv[0] is the program name).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace metadkit::cli
