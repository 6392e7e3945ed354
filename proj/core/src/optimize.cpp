#include "optimize.hpp"

#include <algorithm>
#include <cmath>

namespace metadkit::detail {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

void set_identity(std::vector<double>& h, std::size_t n) {
  h.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) h[i * n + i] = 1.0;
}

}  // namespace

namespace {

MinimizeResult bfgs_core(const Objective& objective, std::vector<double> x0,
                         const MinimizeOptions& options) {
  const std::size_t n = x0.size();
  MinimizeResult result;
  result.x = std::move(x0);
  result.gradient.assign(n, 0.0);
  result.f = objective(result.x, &result.gradient);

  if (n == 0 || inf_norm(result.gradient) <= options.g_tolerance) {
    result.converged = std::isfinite(result.f);
    return result;
  }

  std::vector<double> h;
  set_identity(h, n);
  bool h_is_identity = true;

  std::vector<double> direction(n), x_new(n), g_new(n), s(n), y(n), hy(n);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    result.iterations = iter;

    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc -= h[i * n + j] * result.gradient[j];
      direction[i] = acc;
    }
    double slope = dot(direction, result.gradient);
    if (!(slope < 0.0)) {
      set_identity(h, n);
      h_is_identity = true;
      for (std::size_t i = 0; i < n; ++i) direction[i] = -result.gradient[i];
      slope = dot(direction, result.gradient);
    }

    double step = 1.0;
    const double longest = inf_norm(direction);
    if (longest * step > options.max_step) step = options.max_step / longest;

    bool accepted = false;
    double f_new = result.f;
    for (int k = 0; k < 60; ++k) {
      for (std::size_t i = 0; i < n; ++i) x_new[i] = result.x[i] + step * direction[i];
      f_new = objective(x_new, &g_new);
      if (std::isfinite(f_new) && f_new <= result.f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }

    if (!accepted) {
      if (!h_is_identity) {
        set_identity(h, n);
        h_is_identity = true;
        continue;
      }
      // Steepest descent cannot make progress: we are at numerical precision.
      result.converged = inf_norm(result.gradient) <= 1e3 * options.g_tolerance;
      return result;
    }

    const double decrease = result.f - f_new;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_new[i] - result.x[i];
      y[i] = g_new[i] - result.gradient[i];
    }
    result.x = x_new;
    result.f = f_new;
    result.gradient = g_new;

    const double g_norm = inf_norm(result.gradient);
    if (g_norm <= options.g_tolerance) {
      result.converged = true;
      return result;
    }
    if (decrease < options.f_tolerance) {
      // A tiny gain along a stale quasi-Newton direction is retried once from
      // steepest descent; a tiny steepest-descent gain is convergence.
      if (h_is_identity || g_norm <= 1e3 * options.g_tolerance) {
        result.converged = true;
        return result;
      }
      set_identity(h, n);
      h_is_identity = true;
      continue;
    }

    const double sy = dot(s, y);
    if (sy > 1e-16) {
      if (h_is_identity) {
        // Shanno-Phua scaling of the initial approximation.
        const double scale = sy / dot(y, y);
        for (auto& v : h) v *= scale;
      }
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += h[i * n + j] * y[j];
        hy[i] = acc;
      }
      const double yhy = dot(y, hy);
      const double rho = 1.0 / sy;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          h[i * n + j] += (1.0 + yhy * rho) * rho * s[i] * s[j] -
                          rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
      }
      h_is_identity = false;
    }
  }
  return result;
}

// Solves (A + lambda I) p = b by Cholesky, raising lambda until the shifted
// matrix is positive definite.
std::vector<double> damped_solve(std::vector<double> a, std::vector<double> b, std::size_t n) {
  double diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag = std::max(diag, std::abs(a[i * n + i]));
  double lambda = 0.0;
  for (int attempt = 0; attempt < 40; ++attempt) {
    std::vector<double> l(n * n, 0.0);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double sum = a[i * n + j] + (i == j ? lambda : 0.0);
        for (std::size_t k = 0; k < j; ++k) sum -= l[i * n + k] * l[j * n + k];
        if (i == j) {
          if (!(sum > 0.0)) {
            ok = false;
            break;
          }
          l[i * n + i] = std::sqrt(sum);
        } else {
          l[i * n + j] = sum / l[j * n + j];
        }
      }
    }
    if (ok) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) b[i] -= l[i * n + k] * b[k];
        b[i] /= l[i * n + i];
      }
      for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) b[i] -= l[k * n + i] * b[k];
        b[i] /= l[i * n + i];
      }
      return b;
    }
    lambda = lambda == 0.0 ? std::max(1e-12, 1e-8 * diag) : lambda * 10.0;
  }
  return {};
}

// Newton steps on a finite-difference Hessian of the analytic gradient. BFGS
// stops once line-search gains drop below rounding in f; these steps drive
// the gradient itself towards zero so the optimum is located to near machine
// precision.
void newton_polish(const Objective& objective, MinimizeResult& r,
                   const MinimizeOptions& options) {
  const std::size_t n = r.x.size();
  std::vector<double> hess(n * n), x(n), g_up(n), g_down(n), g_new(n);
  for (int step = 0; step < 8; ++step) {
    const double g_norm = inf_norm(r.gradient);
    if (!(g_norm > options.polish_g_tolerance)) break;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(r.x[j]));
      x = r.x;
      x[j] = r.x[j] + h;
      objective(x, &g_up);
      x[j] = r.x[j] - h;
      objective(x, &g_down);
      for (std::size_t i = 0; i < n; ++i) hess[i * n + j] = (g_up[i] - g_down[i]) / (2.0 * h);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        const double m = 0.5 * (hess[i * n + j] + hess[j * n + i]);
        hess[i * n + j] = hess[j * n + i] = m;
      }
    }
    std::vector<double> minus_g(n);
    for (std::size_t i = 0; i < n; ++i) minus_g[i] = -r.gradient[i];
    const auto p = damped_solve(hess, minus_g, n);
    if (p.empty() || inf_norm(p) > options.max_step) break;
    for (std::size_t i = 0; i < n; ++i) x[i] = r.x[i] + p[i];
    const double f_new = objective(x, &g_new);
    const double slack = 1e-13 * std::max(1.0, std::abs(r.f));
    if (!std::isfinite(f_new) || f_new > r.f + slack || !(inf_norm(g_new) < g_norm)) break;
    r.x = x;
    r.f = f_new;
    r.gradient = g_new;
  }
  if (inf_norm(r.gradient) <= options.g_tolerance) r.converged = true;
}

}  // namespace

MinimizeResult bfgs_minimize(const Objective& objective, std::vector<double> x0,
                             const MinimizeOptions& options) {
  MinimizeResult result = bfgs_core(objective, std::move(x0), options);
  if (!result.x.empty() && std::isfinite(result.f)) newton_polish(objective, result, options);
  return result;
}

}  // namespace metadkit::detail
