#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metadkit/error.hpp"
#include "metadkit/trials.hpp"

namespace metadkit {

// Probability that a random correct trial has strictly higher nlp than a
// random incorrect one, plus half the tie probability. Rank-sum on raw nlp.
// Throws OneClassOnly.
double auroc2(std::span<const double> nlp, std::span<const bool> correct);
double auroc2(const TrialSet& trials);

// Mean nlp of correct trials minus mean nlp of incorrect trials.
double nlp_gap(std::span<const double> nlp, std::span<const bool> correct);
double nlp_gap(const TrialSet& trials);

// Throws EmptySet on no trials.
double accuracy(std::span<const bool> correct);
double accuracy(const TrialSet& trials);

// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

// Pearson correlation of average-rank vectors. Throws LengthMismatch for
// unequal or too-short inputs and ZeroVariance when either side is constant.
double spearman_rho(std::span<const double> x, std::span<const double> y);

struct DomainProfile {
  std::string domain;
  std::string condition;
  std::string format;
  std::size_t n = 0;
  double accuracy = 0.0;
  double d_prime = 0.0;
  double criterion_c = 0.0;
  double meta_d = 0.0;
  double m_ratio = 0.0;
  double auroc2 = 0.0;
  double nlp_gap = 0.0;
  int rank_m_ratio = 0;  // 1 = largest
  int rank_auroc2 = 0;
  bool converged = true;
  bool low_dprime_warning = false;
  std::vector<Warning> warnings;
};

enum class ProfileMetric { MRatio, Auroc2 };

std::string_view to_string(ProfileMetric metric);

struct RankedProfiles {
  std::vector<DomainProfile> profiles;  // input order, rank field filled in
  std::vector<Warning> ties;            // one entry per broken tie
};

// Rank 1 goes to the largest value; equal values are ordered by domain name
// ascending and reported. Throws MixedProfileSet when the profiles do not
// share (condition, format).
RankedProfiles rank_profile(std::vector<DomainProfile> profiles, ProfileMetric metric);

struct RankMove {
  std::string domain;
  int rank_m_ratio_a = 0;
  int rank_m_ratio_b = 0;
  int rank_auroc2_a = 0;
  int rank_auroc2_b = 0;
  double m_ratio_a = 0.0;
  double m_ratio_b = 0.0;
  double auroc2_a = 0.0;
  double auroc2_b = 0.0;
  double d_prime_a = 0.0;
  double d_prime_b = 0.0;
};

struct FormatComparison {
  std::string format_a;
  std::string format_b;
  std::optional<double> rho_m_ratio;  // empty when Spearman is undefined
  std::optional<double> rho_auroc2;
  std::vector<RankMove> moves;        // ordered by domain of profiles_a
  std::vector<std::string> notes;
};

// Spearman correlation of the metric values of matched domains. Throws
// DomainMismatch unless both sides cover the same domains.
FormatComparison compare_formats(const std::vector<DomainProfile>& profiles_a,
                                 const std::vector<DomainProfile>& profiles_b);

}  // namespace metadkit
