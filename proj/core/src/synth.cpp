#include "metadkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "metadkit/rng.hpp"

namespace metadkit {

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Gaussian: return "gaussian";
    case Family::LognormalSkew: return "lognormal_skew";
    case Family::Mixture: return "mixture";
  }
  return "unknown";
}

namespace {

void check_mixture(const std::vector<MixtureComponent>& mix, const char* name) {
  if (mix.empty()) {
    throw Error(ErrorKind::InvalidConfig, std::string(name) + " has no components");
  }
  double total = 0.0;
  for (const auto& c : mix) {
    if (!(c.weight >= 0.0) || !(c.sigma > 0.0) || !std::isfinite(c.mu)) {
      throw Error(ErrorKind::InvalidConfig,
                  std::string(name) + " component needs weight >= 0, sigma > 0");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorKind::InvalidConfig, std::string(name) + " weights must sum to 1");
  }
}

double draw_mixture(StreamRng& rng, const std::vector<MixtureComponent>& mix) {
  const double u = rng.uniform_open();
  double cum = 0.0;
  const MixtureComponent* pick = &mix.back();
  for (const auto& c : mix) {
    cum += c.weight;
    if (u < cum) {
      pick = &c;
      break;
    }
  }
  return pick->mu + pick->sigma * phi_inv(rng.uniform_open());
}

}  // namespace

void validate(const SynthConfig& config) {
  if (config.n_trials < 1) throw Error(ErrorKind::InvalidConfig, "n_trials must be >= 1");
  if (!(config.p_correct >= 0.0 && config.p_correct <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "p_correct must lie in [0, 1]");
  }
  if (config.family == Family::Mixture) {
    check_mixture(config.mixture_correct, "mixture_correct");
    check_mixture(config.mixture_incorrect, "mixture_incorrect");
  } else {
    if (!(config.sigma_correct > 0.0) || !(config.sigma_incorrect > 0.0)) {
      throw Error(ErrorKind::InvalidConfig, "sigmas must be > 0");
    }
    if (!std::isfinite(config.mu_correct) || !std::isfinite(config.mu_incorrect)) {
      throw Error(ErrorKind::InvalidConfig, "means must be finite");
    }
  }
}

TrialSet generate(const SynthConfig& config) {
  validate(config);
  StreamRng rng(config.seed, "synth/v1", 0);
  std::vector<TrialRecord> records;
  records.reserve(config.n_trials);
  char id[32];
  for (std::size_t i = 0; i < config.n_trials; ++i) {
    TrialRecord r;
    std::snprintf(id, sizeof id, "q%06zu", config.id_offset + i + 1);
    r.question_id = id;
    r.domain = config.domain;
    r.condition = config.condition;
    r.format = config.format;
    r.correct = rng.uniform_open() < config.p_correct;
    switch (config.family) {
      case Family::Gaussian: {
        const double mu = r.correct ? config.mu_correct : config.mu_incorrect;
        const double sigma = r.correct ? config.sigma_correct : config.sigma_incorrect;
        r.nlp = mu + sigma * phi_inv(rng.uniform_open());
        break;
      }
      case Family::LognormalSkew: {
        const double mu = r.correct ? config.mu_correct : config.mu_incorrect;
        const double sigma = r.correct ? config.sigma_correct : config.sigma_incorrect;
        r.nlp = mu - std::expm1(sigma * phi_inv(rng.uniform_open()));
        break;
      }
      case Family::Mixture:
        r.nlp = draw_mixture(rng, r.correct ? config.mixture_correct : config.mixture_incorrect);
        break;
    }
    records.push_back(std::move(r));
  }
  return TrialSet(std::move(records), Provenance{"synthetic", {}});
}

TrialSet generate(const std::vector<SynthConfig>& blocks) {
  std::vector<TrialRecord> records;
  for (const auto& block : blocks) {
    const TrialSet part = generate(block);
    records.insert(records.end(), part.begin(), part.end());
  }
  return TrialSet(std::move(records), Provenance{"synthetic", {}});
}

namespace {

using nlohmann::json;

std::vector<MixtureComponent> parse_mixture(const json& value, const std::string& key) {
  if (!value.is_array()) throw Error(ErrorKind::InvalidConfig, key + " must be an array");
  std::vector<MixtureComponent> out;
  for (const auto& c : value) {
    if (!c.is_object()) throw Error(ErrorKind::InvalidConfig, key + " entries must be objects");
    MixtureComponent m;
    m.weight = c.value("weight", 1.0);
    m.mu = c.value("mu", 0.0);
    m.sigma = c.value("sigma", 1.0);
    out.push_back(m);
  }
  return out;
}

std::string as_label(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  return value.dump();
}

SynthConfig parse_block(const json& obj) {
  if (!obj.is_object()) throw Error(ErrorKind::InvalidConfig, "synth block must be an object");
  SynthConfig c;
  for (const auto& [key, value] : obj.items()) {
    try {
      if (key == "n_trials") c.n_trials = value.get<std::size_t>();
      else if (key == "p_correct") c.p_correct = value.get<double>();
      else if (key == "family") {
        const auto name = value.get<std::string>();
        if (name == "gaussian") c.family = Family::Gaussian;
        else if (name == "lognormal_skew") c.family = Family::LognormalSkew;
        else if (name == "mixture") c.family = Family::Mixture;
        else throw Error(ErrorKind::InvalidConfig, "unknown family '" + name + "'");
      }
      else if (key == "mu_correct") c.mu_correct = value.get<double>();
      else if (key == "mu_incorrect") c.mu_incorrect = value.get<double>();
      else if (key == "sigma_correct") c.sigma_correct = value.get<double>();
      else if (key == "sigma_incorrect") c.sigma_incorrect = value.get<double>();
      else if (key == "mixture_correct") c.mixture_correct = parse_mixture(value, key);
      else if (key == "mixture_incorrect") c.mixture_incorrect = parse_mixture(value, key);
      else if (key == "domain") c.domain = as_label(value);
      else if (key == "condition") c.condition = as_label(value);
      else if (key == "format") c.format = as_label(value);
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "id_offset") c.id_offset = value.get<std::size_t>();
      else throw Error(ErrorKind::InvalidConfig, "unknown synth key '" + key + "'");
    } catch (const json::exception& e) {
      throw Error(ErrorKind::InvalidConfig, "bad value for '" + key + "': " + e.what());
    }
  }
  validate(c);
  return c;
}

}  // namespace

std::vector<SynthConfig> parse_synth_configs(const std::string& json_text) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorKind::InvalidConfig, "synth config is not valid JSON");
  std::vector<SynthConfig> out;
  if (doc.is_array()) {
    for (const auto& block : doc) out.push_back(parse_block(block));
  } else {
    out.push_back(parse_block(doc));
  }
  return out;
}

std::vector<SynthConfig> load_synth_configs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_synth_configs(buf.str());
}

double oracle_auroc2(const SynthConfig& config) {
  if (config.family != Family::Gaussian) {
    throw Error(ErrorKind::UnsupportedFamily, "closed-form AUROC2 needs the gaussian family");
  }
  return phi((config.mu_correct - config.mu_incorrect) /
             std::sqrt(config.sigma_correct * config.sigma_correct +
                       config.sigma_incorrect * config.sigma_incorrect));
}

namespace {

// Ascending boundaries: r1 criteria (reversed), meta_c, r2 criteria.
std::vector<double> boundaries(const MetaModel& m) {
  std::vector<double> b(m.criteria_r1.rbegin(), m.criteria_r1.rend());
  b.push_back(m.meta_c);
  b.insert(b.end(), m.criteria_r2.begin(), m.criteria_r2.end());
  return b;
}

double upper_tail(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }
double lower_tail(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Mass of N(mean, 1) on (lo, hi).
double mass(double lo, double hi, double mean) {
  lo -= mean;
  hi -= mean;
  if (lo > 0.0) return upper_tail(lo) - upper_tail(hi);
  return lower_tail(hi) - lower_tail(lo);
}

}  // namespace

CountTable model_counts(double d_prime, double criterion_c, const MetaModel& meta,
                        double n_per_class, const RatingScale& scale) {
  const auto n = static_cast<std::size_t>(scale.n_ratings());
  if (meta.criteria_r1.size() != n - 1 || meta.criteria_r2.size() != n - 1) {
    throw Error(ErrorKind::LengthMismatch, "criteria do not match the rating scale");
  }
  CountTable table = empty_counts(scale);
  const auto b = boundaries(meta);
  const double inf = std::numeric_limits<double>::infinity();
  for (int cls = 0; cls < 2; ++cls) {
    const double sign = cls == 1 ? 0.5 : -0.5;
    const double p_r2 = upper_tail(criterion_c - sign * d_prime);
    const double mean = sign * meta.meta_d;
    const double d_r1 = mass(-inf, meta.meta_c, mean);
    const double d_r2 = mass(meta.meta_c, inf, mean);
    auto& row = cls == 1 ? table.counts_correct : table.counts_incorrect;
    for (std::size_t k = 0; k < 2 * n; ++k) {
      const double lo = k == 0 ? -inf : b[k - 1];
      const double hi = k == 2 * n - 1 ? inf : b[k];
      const double within = mass(lo, hi, mean) / (k < n ? d_r1 : d_r2);
      row[k] = n_per_class * (k < n ? 1.0 - p_r2 : p_r2) * within;
    }
  }
  return table;
}

namespace {

constexpr double kFloor = 1e-12;

// log(p / given) floored at log(1e-12).
double conditional_log(double p, double given) {
  const double floor = std::log(kFloor);
  if (!(p > 0.0 && given > 0.0)) return floor;
  return std::max(std::log(p) - std::log(given), floor);
}

// Log-likelihood contribution of one response side for fixed meta_d/meta_c.
// `crit` lists that side's criteria moving away from meta_c.
double side_loglik(const CountTable& t, double meta_d, double meta_c,
                   const std::vector<double>& crit, bool upper) {
  const auto n = static_cast<std::size_t>(t.n_ratings);
  const double inf = std::numeric_limits<double>::infinity();
  double ll = 0.0;
  for (int cls = 0; cls < 2; ++cls) {
    const auto& row = cls == 1 ? t.counts_correct : t.counts_incorrect;
    const double mean = (cls == 1 ? 0.5 : -0.5) * meta_d;
    const double denom = upper ? mass(meta_c, inf, mean) : mass(-inf, meta_c, mean);
    for (std::size_t r = 0; r < n; ++r) {
      // rating r + 1 lies between edge r and edge r + 1 counted from meta_c
      const double inner = r == 0 ? meta_c : crit[r - 1];
      const double outer = r + 1 < n ? crit[r] : (upper ? inf : -inf);
      const double p = upper ? mass(inner, outer, mean) : mass(outer, inner, mean);
      const std::size_t bin = upper ? n + r : n - 1 - r;
      ll += row[bin] * conditional_log(p, denom);
    }
  }
  return ll;
}

// Cyclic golden-section search over one side's criteria (concave in each
// coordinate). Returns the maximised side log-likelihood.
double optimise_side(const CountTable& t, double meta_d, double meta_c,
                     std::vector<double>& crit, bool upper) {
  const double sign = upper ? 1.0 : -1.0;
  const double reach = 15.0;
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  double best = side_loglik(t, meta_d, meta_c, crit, upper);
  for (int sweep = 0; sweep < 500; ++sweep) {
    const double before = best;
    for (std::size_t j = 0; j < crit.size(); ++j) {
      // distances from meta_c keep the bracket orientation uniform
      const double lo = (j == 0 ? 0.0 : sign * (crit[j - 1] - meta_c)) + 1e-9;
      const double hi = (j + 1 < crit.size() ? sign * (crit[j + 1] - meta_c) : reach) - 1e-9;
      auto eval = [&](double dist) {
        crit[j] = meta_c + sign * dist;
        return side_loglik(t, meta_d, meta_c, crit, upper);
      };
      const double keep = crit[j];
      double a = lo, b = hi;
      double x1 = b - golden * (b - a), x2 = a + golden * (b - a);
      double f1 = eval(x1), f2 = eval(x2);
      while (b - a > 1e-10) {
        if (f1 < f2) {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + golden * (b - a);
          f2 = eval(x2);
        } else {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - golden * (b - a);
          f1 = eval(x1);
        }
      }
      const double candidate = eval(0.5 * (a + b));
      if (candidate >= best) {
        best = candidate;
      } else {
        crit[j] = keep;
      }
    }
    if (best - before < 1e-11) break;
  }
  return best;
}

}  // namespace

GridOracleResult oracle_meta_grid(const CountTable& table, const Type1Fit& type1) {
  if (type1.d_prime == 0.0) throw Error(ErrorKind::ZeroDPrime, "grid oracle needs d' != 0");
  const auto n = static_cast<std::size_t>(table.n_ratings);
  const double ratio = type1.criterion_c / type1.d_prime;

  std::vector<double> r1(n - 1), r2(n - 1);
  auto reset = [&](double meta_c) {
    for (std::size_t i = 0; i < n - 1; ++i) {
      r1[i] = meta_c - 0.5 * static_cast<double>(i + 1);
      r2[i] = meta_c + 0.5 * static_cast<double>(i + 1);
    }
  };

  auto profile = [&](int step_index, double step) {
    const double meta_d = step * step_index;
    const double meta_c = ratio * meta_d;
    // warm start: shift the previous criteria to the new meta_c
    return std::make_pair(meta_d, optimise_side(table, meta_d, meta_c, r1, false) +
                                      optimise_side(table, meta_d, meta_c, r2, true));
  };

  GridOracleResult best{0.0, -std::numeric_limits<double>::infinity(), {}};
  auto consider = [&](double meta_d, double ll) {
    if (ll > best.log_likelihood) {
      best.meta_d = meta_d;
      best.log_likelihood = ll;
      best.model = {meta_d, ratio * meta_d, r1, r2};
    }
  };

  // Coarse pass: meta_d = 0, 0.025, ..., 3.
  reset(0.0);
  double previous_c = 0.0;
  for (int i = 0; i <= 120; ++i) {
    const double meta_c = ratio * 0.025 * i;
    for (auto& c : r1) c += meta_c - previous_c;
    for (auto& c : r2) c += meta_c - previous_c;
    previous_c = meta_c;
    auto [m, ll] = profile(i, 0.025);
    consider(m, ll);
  }

  // Fine pass on the 0.001 grid within one coarse step of the coarse optimum.
  const int centre = static_cast<int>(std::lround(best.meta_d * 1000.0));
  const int first = std::max(0, centre - 25);
  const int last = std::min(3000, centre + 25);
  r1 = best.model.criteria_r1;
  r2 = best.model.criteria_r2;
  previous_c = best.model.meta_c;
  for (int i = first; i <= last; ++i) {
    const double meta_c = ratio * 0.001 * i;
    for (auto& c : r1) c += meta_c - previous_c;
    for (auto& c : r2) c += meta_c - previous_c;
    previous_c = meta_c;
    auto [m, ll] = profile(i, 0.001);
    consider(m, ll);
  }
  return best;
}

}  // namespace metadkit
