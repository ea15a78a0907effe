#pragma once

// Closed-form weighted solutions used as references.

#include <cmath>

#include "phihilfer/solver.hpp"
#include "phihilfer/special_functions.hpp"

namespace phihilfer {

/// f = 0: w is piecewise constant, (u_a + S_k) / Gamma(sigma) on segment k,
/// with the jumps driven by the left limits u(t_k^-) = w y_k^{sigma-1}.
/// At an impulse time the left limit is returned.
inline double homogeneous_weighted_oracle(const ImpulsiveProblem& p, double t) {
  const double sigma = p.order.sigma();
  const double gs = std::tgamma(sigma);
  const double xa = p.phi.eval(p.a);
  double S = 0.0;
  double w = p.u_a / gs;
  for (std::size_t k = 0; k < p.impulse_count() && p.impulse_times[k] < t; ++k) {
    const double y = p.phi.eval(p.impulse_times[k]) - xa;
    S += p.impulse_maps[k](w * std::pow(y, sigma - 1.0));
    w = (p.u_a + S) / gs;
  }
  return w;
}

/// f = lambda u without impulses: w = u_a E_{rho,sigma}(lambda y^rho).
inline double linear_weighted_oracle(const ImpulsiveProblem& p, double lambda, double t) {
  if (p.impulse_count() != 0) throw ParameterError("linear oracle: impulses are not supported");
  const double y = p.phi.eval(t) - p.phi.eval(p.a);
  return p.u_a * mittag_leffler_two(p.order.rho(), p.order.sigma(), lambda * std::pow(y, p.order.rho()));
}

}  // namespace phihilfer
