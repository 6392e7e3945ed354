#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "metadkit/binning.hpp"
#include "metadkit/sdt.hpp"
#include "metadkit/trials.hpp"

namespace metadkit {

enum class Family {
  Gaussian,       // nlp ~ N(mu, sigma)
  LognormalSkew,  // nlp = mu - (exp(sigma * z) - 1): median mu, long low tail
  Mixture,        // per-class Gaussian mixture
};

std::string_view to_string(Family family);

struct MixtureComponent {
  double weight = 1.0;
  double mu = 0.0;
  double sigma = 1.0;
};

struct SynthConfig {
  std::size_t n_trials = 1000;
  double p_correct = 0.7;
  Family family = Family::Gaussian;
  double mu_correct = 0.0;
  double mu_incorrect = 0.0;
  double sigma_correct = 1.0;
  double sigma_incorrect = 1.0;
  std::vector<MixtureComponent> mixture_correct;
  std::vector<MixtureComponent> mixture_incorrect;
  std::string domain = "Synthetic";
  std::string condition = "1";
  std::string format = "synthetic";
  std::uint64_t seed = 42;
  // Question ids are q%06d numbered from id_offset + 1.
  std::size_t id_offset = 0;
};

// Throws InvalidConfig describing the first violated constraint.
void validate(const SynthConfig& config);

// Correctness ~ Bernoulli(p_correct), nlp from the class-conditional family.
// Deterministic for a given config.
TrialSet generate(const SynthConfig& config);

// Concatenation of several blocks (e.g. one per domain and condition).
TrialSet generate(const std::vector<SynthConfig>& blocks);

// Blocks from a JSON document: one config object or an array of them.
std::vector<SynthConfig> parse_synth_configs(const std::string& json_text);
std::vector<SynthConfig> load_synth_configs(const std::filesystem::path& path);

// Phi((mu_c - mu_i) / sqrt(sigma_c^2 + sigma_i^2)); Gaussian family only,
// UnsupportedFamily otherwise.
double oracle_auroc2(const SynthConfig& config);

// Expected (unpadded) count table of the generative SDT model: the Type-1
// model (d', c) fixes each class's response split, the meta-level model
// fixes the rating distribution within each response.
CountTable model_counts(double d_prime, double criterion_c, const MetaModel& meta,
                        double n_per_class, const RatingScale& scale);

struct GridOracleResult {
  double meta_d = 0.0;
  double log_likelihood = 0.0;
  MetaModel model;
};

// Exhaustive profile-likelihood search over meta_d in [0, 3] on a 0.001
// grid (coarse pass, then the fine grid around the best coarse point), with
// the Type-2 criteria re-optimised at every grid point by cyclic golden-
// section search. Independent of meta_d_fit; intended for tests.
GridOracleResult oracle_meta_grid(const CountTable& table, const Type1Fit& type1);

}  // namespace metadkit
