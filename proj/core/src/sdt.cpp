#include "metadkit/sdt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "optimize.hpp"

namespace metadkit {

double phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double phi_density(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

namespace {

// Wichura (1988), algorithm AS 241 (PPND16), valid for 0 < p <= 0.5 here.
double ppnd16_lower(double p) {
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        ((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
             6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
           1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
         1.3314166789178437745e+2) * r + 3.3871328727963666080e+0;
    const double den =
        ((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
             3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
           5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
         4.2313330701600911252e+1) * r + 1.0;
    return q * num / den;
  }
  double r = std::sqrt(-std::log(p));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        ((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
             2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
           3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
         4.63033784615654529590e+0) * r + 1.42343711074968357734e+0;
    const double den =
        ((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
             1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
           6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
         2.05319162663775882187e+0) * r + 1.0;
    value = num / den;
  } else {
    r -= 5.0;
    const double num =
        ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
             1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
           2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
         5.46378491116411436990e+0) * r + 6.65790464350110377720e+0;
    const double den =
        ((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
             1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
           1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
         5.99832206555887937690e-1) * r + 1.0;
    value = num / den;
  }
  return -value;
}

}  // namespace

double phi_inv(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorKind::OutOfDomain, "phi_inv requires 0 < p < 1");
  }
  // Work in the lower tail, where phi() has full relative precision; 1 - p
  // is exact for p >= 0.5.
  if (p > 0.5) return -phi_inv(1.0 - p);
  double x = ppnd16_lower(p);
  // One Halley step polishes the rational approximation to machine precision.
  const double e = phi(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double phi_inv_clamped(double p) {
  return phi_inv(std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp));
}

Type1Fit type1_fit(const CountTable& table) {
  const auto n = static_cast<std::size_t>(table.n_ratings);
  Type1Fit fit;
  const double total_correct = table.total_correct();
  const double total_incorrect = table.total_incorrect();
  if (!(total_correct > 0.0) || !(total_incorrect > 0.0)) {
    throw Error(ErrorKind::OneClassOnly, "a stimulus class has zero total count");
  }
  double upper_correct = 0.0, upper_incorrect = 0.0;
  for (std::size_t b = n; b < 2 * n; ++b) {
    upper_correct += table.counts_correct[b];
    upper_incorrect += table.counts_incorrect[b];
  }
  fit.hit_rate = upper_correct / total_correct;
  fit.false_alarm_rate = upper_incorrect / total_incorrect;
  const double z_hit = phi_inv_clamped(fit.hit_rate);
  const double z_fa = phi_inv_clamped(fit.false_alarm_rate);
  fit.d_prime = z_hit - z_fa;
  fit.criterion_c = -0.5 * (z_hit + z_fa);

  if (!table.padded) {
    fit.warnings.push_back({"UnpaddedTable", "Type-1 fit on an unpadded count table"});
  }
  if (table.raw_total_correct() <= 0.0 || table.raw_total_incorrect() <= 0.0) {
    fit.degenerate = true;
    fit.warnings.push_back({"DegenerateTable",
                            "a stimulus class had no trials before padding"});
  }
  return fit;
}

namespace {

constexpr double kLogClamp = -27.631021115928547;  // log(1e-12)

// log(prob / given), the response-conditional cell probability, floored at
// log(1e-12). Both masses come from tail-accurate CDFs, so far-tail cells
// keep their true conditional probability instead of collapsing to the floor.
double conditional_log(double prob, double given, bool* clamped = nullptr) {
  double value = kLogClamp;
  if (prob > 0.0 && given > 0.0) value = std::log(prob) - std::log(given);
  const bool floor = !(value > kLogClamp);
  if (clamped) *clamped = floor;
  return floor ? kLogClamp : value;
}

// Mass of N(0,1) between a and b (a < b), computed on the side of zero that
// keeps the subtraction accurate.
double interval_mass(double a, double b) {
  if (a > 0.0) return phi(-a) - phi(-b);
  return phi(b) - phi(a);
}

}  // namespace

namespace detail {

MetaModel model_from_theta(const std::vector<double>& theta, double criterion_ratio,
                           int n_ratings) {
  MetaModel model;
  model.meta_d = theta[0];
  model.meta_c = criterion_ratio * theta[0];
  const auto gaps = static_cast<std::size_t>(n_ratings - 1);
  double below = model.meta_c, above = model.meta_c;
  for (std::size_t i = 0; i < gaps; ++i) {
    below -= std::exp(theta[1 + i]);
    above += std::exp(theta[1 + gaps + i]);
    model.criteria_r1.push_back(below);
    model.criteria_r2.push_back(above);
  }
  return model;
}

double meta_objective(const CountTable& table, double criterion_ratio,
                      const std::vector<double>& theta, std::vector<double>* gradient) {
  const int n = table.n_ratings;
  const auto un = static_cast<std::size_t>(n);
  const std::size_t n_params = 1 + 2 * (un - 1);
  const std::size_t n_bounds = 2 * un - 1;
  const std::size_t centre = un - 1;

  // Ascending boundaries and their Jacobian with respect to theta.
  std::vector<double> bounds(n_bounds);
  std::vector<double> jac(n_bounds * n_params, 0.0);
  const double m = theta[0];
  bounds[centre] = criterion_ratio * m;
  for (std::size_t j = 0; j < n_bounds; ++j) jac[j * n_params] = criterion_ratio;
  for (std::size_t i = 1; i < un; ++i) {
    const double gap_lo = std::exp(theta[i]);
    const double gap_hi = std::exp(theta[un - 1 + i]);
    bounds[centre - i] = bounds[centre - i + 1] - gap_lo;
    bounds[centre + i] = bounds[centre + i - 1] + gap_hi;
    for (std::size_t k = i; k < un; ++k) {
      jac[(centre - k) * n_params + i] = -gap_lo;
      jac[(centre + k) * n_params + (un - 1 + i)] = gap_hi;
    }
  }

  const double total = table.total_correct() + table.total_incorrect();
  double ll = 0.0;
  if (gradient) gradient->assign(n_params, 0.0);
  std::vector<double> dz_lo(n_params), dz_hi(n_params);

  for (int cls = 0; cls < 2; ++cls) {
    const auto& counts = cls == 1 ? table.counts_correct : table.counts_incorrect;
    const double mean = cls == 1 ? 0.5 * m : -0.5 * m;
    const double dmean = cls == 1 ? 0.5 : -0.5;

    auto z_of = [&](std::size_t j) { return bounds[j] - mean; };
    auto dz_of = [&](std::size_t j, std::vector<double>& out) {
      for (std::size_t p = 0; p < n_params; ++p) out[p] = jac[j * n_params + p];
      out[0] -= dmean;
    };

    const double z_c = z_of(centre);
    const double denom[2] = {phi(z_c), phi(-z_c)};
    const double dens_c = phi_density(z_c);

    for (std::size_t b = 0; b < 2 * un; ++b) {
      const double count = counts[b];
      if (count == 0.0) continue;
      const bool has_lo = b > 0;
      const bool has_hi = b < n_bounds;
      const double z_lo = has_lo ? z_of(b - 1) : -INFINITY;
      const double z_hi = has_hi ? z_of(b) : INFINITY;
      const double prob = has_lo && has_hi ? interval_mass(z_lo, z_hi)
                          : has_hi        ? phi(z_hi)
                                          : phi(-z_lo);
      const int side = b < un ? 0 : 1;
      const double d = denom[side];
      bool clamped = false;
      ll += count * conditional_log(prob, d, &clamped);

      if (!gradient || clamped) continue;
      if (has_hi) {
        dz_of(b, dz_hi);
        const double w = count * phi_density(z_hi) / prob;
        for (std::size_t p = 0; p < n_params; ++p) (*gradient)[p] += w * dz_hi[p];
      }
      if (has_lo) {
        dz_of(b - 1, dz_lo);
        const double w = count * phi_density(z_lo) / prob;
        for (std::size_t p = 0; p < n_params; ++p) (*gradient)[p] -= w * dz_lo[p];
      }
      dz_of(centre, dz_hi);
      const double w = count * dens_c / d * (side == 0 ? 1.0 : -1.0);
      for (std::size_t p = 0; p < n_params; ++p) (*gradient)[p] -= w * dz_hi[p];
    }
  }

  // Negative mean log-likelihood keeps the optimiser's scale independent of N.
  if (gradient) {
    for (auto& g : *gradient) g = -g / total;
  }
  return -ll / total;
}

}  // namespace detail

double type2_log_likelihood(const CountTable& table, const MetaModel& model) {
  const auto un = static_cast<std::size_t>(table.n_ratings);
  if (model.criteria_r1.size() != un - 1 || model.criteria_r2.size() != un - 1) {
    throw Error(ErrorKind::LengthMismatch, "criteria do not match the rating scale");
  }
  std::vector<double> bounds;
  for (std::size_t i = un - 1; i-- > 0;) bounds.push_back(model.criteria_r1[i]);
  bounds.push_back(model.meta_c);
  for (double c : model.criteria_r2) bounds.push_back(c);

  double ll = 0.0;
  for (int cls = 0; cls < 2; ++cls) {
    const auto& counts = cls == 1 ? table.counts_correct : table.counts_incorrect;
    const double mean = (cls == 1 ? 0.5 : -0.5) * model.meta_d;
    const double z_c = model.meta_c - mean;
    for (std::size_t b = 0; b < 2 * un; ++b) {
      const double lo = b > 0 ? bounds[b - 1] - mean : -INFINITY;
      const double hi = b < bounds.size() ? bounds[b] - mean : INFINITY;
      const double prob = interval_mass(lo, hi);
      const double d = b < un ? phi(z_c) : phi(-z_c);
      ll += counts[b] * conditional_log(prob, d);
    }
  }
  return ll;
}

namespace {

// Gaps between pooled-rating boundaries mapped through phi_inv.
std::vector<double> initial_log_gaps(const CountTable& table) {
  const auto un = static_cast<std::size_t>(table.n_ratings);
  const double total = table.total_correct() + table.total_incorrect();
  std::vector<double> z(2 * un - 1);
  double cum = 0.0;
  for (std::size_t j = 0; j + 1 < 2 * un; ++j) {
    cum += table.counts_correct[j] + table.counts_incorrect[j];
    z[j] = phi_inv_clamped(cum / total);
  }
  std::vector<double> theta(2 * (un - 1));
  const std::size_t centre = un - 1;
  for (std::size_t i = 1; i < un; ++i) {
    const double lo = std::max(z[centre - i + 1] - z[centre - i], 1e-3);
    const double hi = std::max(z[centre + i] - z[centre + i - 1], 1e-3);
    theta[i - 1] = std::log(lo);
    theta[un - 2 + i] = std::log(hi);
  }
  return theta;
}

// Criteria matched to the data for a given (meta_d, meta_c): within each
// response side, the k-th criterion sits where the class-weighted model
// mixture reaches the side's observed cumulative rating share.
std::vector<double> model_log_gaps(const CountTable& table, double meta_d, double meta_c) {
  const auto un = static_cast<std::size_t>(table.n_ratings);
  const double w_c = table.total_correct(), w_i = table.total_incorrect();
  auto upper_mass = [&](double x) {  // mixture mass above x
    return (w_c * phi(0.5 * meta_d - x) + w_i * phi(-0.5 * meta_d - x)) / (w_c + w_i);
  };
  std::vector<double> theta(2 * (un - 1));
  for (int side = 0; side < 2; ++side) {
    const bool upper = side == 1;
    double side_total = 0.0;
    for (std::size_t r = 0; r < un; ++r) {
      const std::size_t b = upper ? un + r : un - 1 - r;
      side_total += table.counts_correct[b] + table.counts_incorrect[b];
    }
    const double at_c = upper_mass(meta_c);
    const double side_mass = upper ? at_c : 1.0 - at_c;
    double previous = meta_c, cum = 0.0;
    for (std::size_t r = 0; r + 1 < un; ++r) {
      const std::size_t b = upper ? un + r : un - 1 - r;
      cum += table.counts_correct[b] + table.counts_incorrect[b];
      const double target = side_mass * cum / side_total;
      // Bisection on the distance from meta_c.
      double lo = 0.0, hi = 40.0;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double x = upper ? meta_c + mid : meta_c - mid;
        const double covered = upper ? at_c - upper_mass(x) : upper_mass(x) - at_c;
        (covered < target ? lo : hi) = mid;
      }
      const double at = upper ? meta_c + 0.5 * (lo + hi) : meta_c - 0.5 * (lo + hi);
      const double gap = std::max(std::abs(at - previous), 1e-6);
      theta[(upper ? un - 1 : 0) + r] = std::log(gap);
      previous = at;
    }
  }
  return theta;
}

struct Attempt {
  std::vector<double> theta;  // full parameter vector
  double objective;
  int iterations;
  bool converged;
};

Attempt run_fit(const CountTable& table, double ratio, double meta_d0,
                const std::vector<double>& log_gaps, bool fix_meta_d,
                const MetaFitOptions& options) {
  const double total = table.total_correct() + table.total_incorrect();
  detail::MinimizeOptions opt;
  opt.max_iterations = options.max_iterations;
  opt.f_tolerance = options.tolerance / total;
  opt.g_tolerance = std::max(1e-7 / total, 1e-12);

  if (!fix_meta_d) {
    std::vector<double> x0{meta_d0};
    x0.insert(x0.end(), log_gaps.begin(), log_gaps.end());
    auto f = [&](const std::vector<double>& x, std::vector<double>* g) {
      return detail::meta_objective(table, ratio, x, g);
    };
    auto r = detail::bfgs_minimize(f, std::move(x0), opt);
    return {r.x, r.f, r.iterations, r.converged};
  }

  std::vector<double> full(1 + log_gaps.size(), 0.0);
  full[0] = meta_d0;
  auto f = [&](const std::vector<double>& x, std::vector<double>* g) {
    std::copy(x.begin(), x.end(), full.begin() + 1);
    std::vector<double> g_full;
    const double value = detail::meta_objective(table, ratio, full, g ? &g_full : nullptr);
    if (g) g->assign(g_full.begin() + 1, g_full.end());
    return value;
  };
  auto r = detail::bfgs_minimize(f, log_gaps, opt);
  std::vector<double> theta{meta_d0};
  theta.insert(theta.end(), r.x.begin(), r.x.end());
  return {theta, r.f, r.iterations, r.converged};
}

}  // namespace

SdtFit meta_d_fit(const CountTable& table, const Type1Fit& type1,
                  const MetaFitOptions& options) {
  if (type1.d_prime == 0.0) {
    throw Error(ErrorKind::ZeroDPrime, "meta-d' fit requires a non-zero d'");
  }
  const double total = table.total_correct() + table.total_incorrect();
  if (!(table.total_correct() > 0.0) || !(table.total_incorrect() > 0.0)) {
    throw Error(ErrorKind::OneClassOnly, "a stimulus class has zero total count");
  }

  SdtFit fit;
  fit.d_prime = type1.d_prime;
  fit.criterion_c = type1.criterion_c;
  fit.warnings = type1.warnings;
  const double ratio = type1.criterion_c / type1.d_prime;
  const auto gaps0 = initial_log_gaps(table);

  const double start = std::clamp(std::abs(type1.d_prime), 0.05, 5.0);
  Attempt best = run_fit(table, ratio, start, gaps0, false, options);
  // meta_c moves with meta_d at rate c/d'. When that rate is steep the
  // likelihood can have a second mode far from the Type-1 start, so further
  // starts spread over the plausible meta_d range are tried as well.
  if (!best.converged || best.theta[0] <= 0.0 || std::abs(ratio) > 1.0) {
    for (double alt : {0.25, 1.0, 2.0, 3.5}) {
      Attempt a =
          run_fit(table, ratio, alt, model_log_gaps(table, alt, ratio * alt), false, options);
      const bool better = a.objective < best.objective - 1e-12;
      const bool rescues = a.converged && !best.converged && a.objective <= best.objective + 1e-12;
      if (better || rescues) best = std::move(a);
    }
  }
  int iterations = best.iterations;

  if (best.theta[0] < 0.0) {
    std::vector<double> gaps(best.theta.begin() + 1, best.theta.end());
    Attempt bounded = run_fit(table, ratio, 0.0, gaps, true, options);
    iterations += bounded.iterations;
    best = std::move(bounded);
    fit.warnings.push_back({"AntiInformativeConfidence",
                            "unconstrained meta-d' optimum was negative; reported as 0"});
  }

  const MetaModel model = detail::model_from_theta(best.theta, ratio, table.n_ratings);
  fit.meta_d = model.meta_d;
  fit.meta_c = model.meta_c;
  fit.t2_criteria_r1 = model.criteria_r1;
  fit.t2_criteria_r2 = model.criteria_r2;
  fit.log_likelihood = -best.objective * total;
  fit.converged = best.converged && std::isfinite(fit.log_likelihood);
  fit.iterations = iterations;
  fit.m_ratio = fit.meta_d / fit.d_prime;
  fit.low_dprime_warning = fit.d_prime < kLowDPrimeThreshold;
  if (fit.low_dprime_warning) {
    fit.warnings.push_back({"LowDPrime", "d' below 0.5; M-ratio is unstable"});
  }
  if (!fit.converged) {
    fit.warnings.push_back({"NoConvergence", "meta-d' fit hit the iteration cap or stalled"});
  }

  // All raw mass on one response side.
  const auto un = static_cast<std::size_t>(table.n_ratings);
  const double pad = table.padded ? table.pad_value : 0.0;
  double raw_r1 = 0.0, raw_r2 = 0.0;
  for (std::size_t b = 0; b < 2 * un; ++b) {
    const double raw = table.counts_correct[b] + table.counts_incorrect[b] - 2.0 * pad;
    (b < un ? raw_r1 : raw_r2) += raw;
  }
  if (raw_r1 <= 0.0 || raw_r2 <= 0.0) {
    fit.warnings.push_back({"DegenerateResponse", "all trials fall on one response side"});
  }
  return fit;
}

double m_ratio(const SdtFit& fit) {
  if (fit.d_prime == 0.0) throw Error(ErrorKind::ZeroDPrime, "M-ratio undefined for d' = 0");
  return fit.meta_d / fit.d_prime;
}

}  // namespace metadkit
