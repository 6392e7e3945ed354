#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metadkit/pipeline.hpp"
#include "metadkit/trials.hpp"

namespace metadkit {

enum class Metric { Accuracy, NlpGap, Auroc2, DPrime, MetaD, MRatio };

std::string_view to_string(Metric metric);
std::optional<Metric> metric_from_string(std::string_view name);

// Applies the full pipeline for `metric` to one sample (re-binning for the
// SDT metrics). Throws metadkit::Error when the metric is undefined.
// `converged` (optional) receives the meta-d' fit's convergence flag.
double evaluate_metric(Metric metric, std::span<const double> nlp,
                       std::span<const bool> correct, const AnalysisOptions& options,
                       bool* converged = nullptr);

enum class Pairing { Paired, Independent };

std::string_view to_string(Pairing pairing);

inline constexpr double kDegenerateAlarmFraction = 0.01;

struct BootstrapOptions {
  std::size_t n_resamples = 10000;
  std::uint64_t seed = 42;
  double ci_level = 0.95;
  unsigned workers = 1;
  Pairing pairing = Pairing::Paired;
  AnalysisOptions analysis;
  // Names the child stream; empty means "<domain>".
  std::string stream_label;
};

struct BootstrapResult {
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double ci_level = 0.95;
  std::size_t n_resamples = 0;
  std::size_t degenerate_count = 0;   // undefined resamples, excluded
  std::size_t nonconverged_count = 0; // kept, but counted
  bool too_many_degenerate = false;   // degenerate_count > 1% of n_resamples
};

// Linear-interpolation (type 7) percentile of an ascending-sorted sample.
double percentile(std::span<const double> sorted, double probability);

// Question-level bootstrap of one metric within a single domain.
BootstrapResult bootstrap_metric(const TrialSet& trials, Metric metric,
                                 const BootstrapOptions& options);

enum class Decision { Supported, NotSupported, Equivalent, NotEquivalent };

std::string_view to_string(Decision decision);

enum class Rule { CiLowerGtZero, Tost };

struct ContrastResult {
  std::string hypothesis_id;
  Metric metric = Metric::MetaD;
  std::string domain;
  std::string condition_a;
  std::string condition_b;
  double delta_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double ci_level = 0.95;
  std::size_t n_resamples = 0;
  std::uint64_t seed = 42;
  Pairing pairing = Pairing::Paired;
  Decision decision = Decision::NotSupported;
  std::size_t degenerate_resample_count = 0;
  std::size_t nonconverged_count = 0;
  bool too_many_degenerate = false;
  bool point_outside_ci = false;
};

// Bootstrap of metric(a) - metric(b). In paired mode one shared sequence of
// question-id draws drives both sets (throws UnpairedSets unless
// validate_paired passes); in independent mode each side draws from its own
// stream. `decision` is filled with the CI-lower-bound rule.
ContrastResult bootstrap_contrast(const TrialSet& trials_a, const TrialSet& trials_b,
                                  Metric metric, const BootstrapOptions& options);

// equivalent iff -delta < ci_low and ci_high < delta. Throws WrongCiLevel
// unless the contrast carries a 90% interval.
Decision tost(const ContrastResult& contrast, double delta);

Decision ci_lower_rule(const ContrastResult& contrast);

struct HypothesisSpec {
  std::string id;
  std::string condition_a;  // minuend
  std::string condition_b;  // subtrahend
  std::vector<std::string> domains;
  Metric metric = Metric::MetaD;
  Rule rule = Rule::CiLowerGtZero;
  double delta = 0.0;  // TOST margin
  double ci_level = 0.95;
  std::optional<std::string> format;
};

// H1-H4 of the confirmatory plan: treatment effect, non-degradation (TOST),
// conditional advantage, causal test.
std::vector<HypothesisSpec> confirmatory_hypotheses(double tost_delta = 0.17,
                                                    double ci_level = 0.95,
                                                    double tost_ci_level = 0.90);

struct SuiteOptions {
  std::size_t n_resamples = 10000;
  std::uint64_t seed = 42;
  unsigned workers = 1;
  Pairing pairing = Pairing::Paired;
  AnalysisOptions analysis;
};

// One ContrastResult per (spec, domain), in spec order. Throws
// MissingCondition when a referenced condition/domain has no trials.
std::vector<ContrastResult> run_hypothesis_suite(const TrialSet& trials,
                                                 const std::vector<HypothesisSpec>& specs,
                                                 const SuiteOptions& options);

}  // namespace metadkit
