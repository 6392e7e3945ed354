#pragma once

// Small dense quasi-Newton minimiser used by the meta-d' fit. Internal.

#include <functional>
#include <vector>

namespace metadkit::detail {

using Objective = std::function<double(const std::vector<double>&, std::vector<double>*)>;

struct MinimizeOptions {
  int max_iterations = 10000;
  // Stop once an accepted step lowers the objective by less than this.
  double f_tolerance = 1e-12;
  // Gradient infinity norm regarded as stationary.
  double g_tolerance = 1e-10;
  // Steps whose largest coordinate move exceeds this are shortened.
  double max_step = 4.0;
  // Newton refinement after BFGS continues while the gradient infinity norm
  // exceeds this.
  double polish_g_tolerance = 1e-13;
};

struct MinimizeResult {
  std::vector<double> x;
  double f = 0.0;
  std::vector<double> gradient;
  int iterations = 0;
  bool converged = false;
};

// BFGS on the inverse Hessian with Armijo backtracking, followed by a few
// damped Newton steps. The approximation is reset to the identity whenever it
// stops producing descent directions.
MinimizeResult bfgs_minimize(const Objective& objective, std::vector<double> x0,
                             const MinimizeOptions& options);

}  // namespace metadkit::detail
