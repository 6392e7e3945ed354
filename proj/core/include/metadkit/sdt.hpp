#pragma once

#include <vector>

#include "metadkit/binning.hpp"
#include "metadkit/error.hpp"

namespace metadkit {

// Standard normal CDF, absolute error below 1e-15.
double phi(double x);

// Standard normal density.
double phi_density(double x);

// Inverse standard normal CDF. Throws OutOfDomain unless 0 < p < 1.
double phi_inv(double p);

inline constexpr double kProbabilityClamp = 1e-12;

// phi_inv with p clamped to [1e-12, 1 - 1e-12].
double phi_inv_clamped(double p);

inline constexpr double kLowDPrimeThreshold = 0.5;

struct Type1Fit {
  double d_prime = 0.0;
  double criterion_c = 0.0;
  double hit_rate = 0.0;          // P(R2 | correct)
  double false_alarm_rate = 0.0;  // P(R2 | incorrect)
  bool degenerate = false;        // a stimulus class had no raw trials
  std::vector<Warning> warnings;
};

// Median-split Type-1 fit on a padded table:
// d' = z(HR) - z(FAR), c = -(z(HR) + z(FAR)) / 2.
Type1Fit type1_fit(const CountTable& table);

// Equal-variance meta-level model. Criteria are absolute positions on the
// evidence axis; r1 criteria descend below meta_c, r2 criteria ascend above.
struct MetaModel {
  double meta_d = 0.0;
  double meta_c = 0.0;
  std::vector<double> criteria_r1;
  std::vector<double> criteria_r2;
};

// Response-conditional Type-2 log-likelihood of a count table. Each cell's
// probability given its response side is clamped at 1e-12 inside the
// logarithm.
double type2_log_likelihood(const CountTable& table, const MetaModel& model);

struct SdtFit {
  double d_prime = 0.0;
  double criterion_c = 0.0;
  double meta_d = 0.0;
  double meta_c = 0.0;
  std::vector<double> t2_criteria_r1;  // descending, all < meta_c
  std::vector<double> t2_criteria_r2;  // ascending, all > meta_c
  double m_ratio = 0.0;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  bool low_dprime_warning = false;
  std::vector<Warning> warnings;

  MetaModel model() const { return {meta_d, meta_c, t2_criteria_r1, t2_criteria_r2}; }
};

struct MetaFitOptions {
  int max_iterations = 10000;
  // Convergence: log-likelihood gain over one full step below this value.
  double tolerance = 1e-8;
};

// Maniscalco-Lau maximum-likelihood meta-d' with s = 1. The meta Type-1
// criterion is tied to meta_c = c * meta_d / d'; meta_d is constrained to be
// non-negative (an anti-informative optimum is reported as 0 with a warning).
// Throws ZeroDPrime when d' == 0. Non-convergence is reported through
// `converged`, never thrown.
SdtFit meta_d_fit(const CountTable& table, const Type1Fit& type1,
                  const MetaFitOptions& options = {});

// meta_d / d'. Throws ZeroDPrime when d' == 0.
double m_ratio(const SdtFit& fit);

namespace detail {

// Negative mean log-likelihood and gradient in the unconstrained
// parameterisation [meta_d, log R1 gaps..., log R2 gaps...]. Exposed for
// gradient tests.
double meta_objective(const CountTable& table, double criterion_ratio,
                      const std::vector<double>& theta, std::vector<double>* gradient);

MetaModel model_from_theta(const std::vector<double>& theta, double criterion_ratio,
                           int n_ratings);

}  // namespace detail

}  // namespace metadkit
