#pragma once

#include <span>
#include <string>
#include <vector>

#include "metadkit/binning.hpp"
#include "metadkit/nonparam.hpp"
#include "metadkit/sdt.hpp"
#include "metadkit/trials.hpp"

namespace metadkit {

enum class BinningScope {
  PerCell,  // quantiles within each (condition, format, domain) cell
  Global,   // quantiles across all domains of a (condition, format)
};

std::string_view to_string(BinningScope scope);

struct AnalysisOptions {
  RatingScale scale{4};
  double pad_value = 0.5;
  BinningScope binning_scope = BinningScope::PerCell;
  MetaFitOptions fit;
};

struct SdtSummary {
  CountTable counts;  // padded
  Type1Fit type1;
  SdtFit fit;
};

// counts -> pad -> Type-1 fit -> meta-d' fit, on already-binned trials.
SdtSummary fit_binned(std::span<const int> bins, std::span<const bool> correct,
                      const AnalysisOptions& options);

// Bins within the given sample, then fit_binned.
SdtSummary fit_sample(std::span<const double> nlp, std::span<const bool> correct,
                      const AnalysisOptions& options);

// Full metric bundle for every (condition, format, domain) cell, grouped by
// (condition, format) in first-appearance order with domains in
// first-appearance order; ranks are assigned within each group. Each cell
// must hold at least 2 * n_bins trials (TooFewTrials otherwise).
std::vector<DomainProfile> diagnose(const TrialSet& trials, const AnalysisOptions& options,
                                    std::vector<Warning>* warnings = nullptr);

// Profiles of one (condition, format), in diagnose() order.
std::vector<DomainProfile> select_profiles(const std::vector<DomainProfile>& profiles,
                                           const std::string& condition,
                                           const std::string& format);

}  // namespace metadkit
