#pragma once

// Closed-form envelopes: Gronwall-type bound, a-priori factor and norm bound,
// continuous-dependence bounds and Ulam-Hyers(-Rassias) constants.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "phihilfer/errors.hpp"
#include "phihilfer/expr.hpp"
#include "phihilfer/frac_calc.hpp"
#include "phihilfer/phi_kernel.hpp"
#include "phihilfer/solver.hpp"
#include "phihilfer/special_functions.hpp"

namespace phihilfer {

struct GronwallInputs {
  std::function<double(double)> V;
  std::function<double(double)> g;
  std::vector<double> betas;
  std::vector<double> impulse_times;
  double rho = 0.5;
  PhiFunction phi = PhiFunction::identity();
  double a = 0.0;
};

namespace detail {

inline void check_bound_orders(double rho, double sigma) {
  if (!(rho > 0.0 && rho <= 1.0)) throw ParameterError("bounds: rho must lie in (0, 1]");
  if (!(sigma > 0.0 && sigma <= 1.0)) throw ParameterError("bounds: sigma must lie in (0, 1]");
}

inline void check_nonnegative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << "bounds: " << name << " must be finite and nonnegative, got " << v;
    throw ParameterError(os.str());
  }
}

inline double span(const PhiFunction& phi, double a, double T) {
  if (!(a < T)) throw ParameterError("bounds: requires a < T");
  return phi.eval(T) - phi.eval(a);
}

/// (phi(T) - phi(a))^{1 - sigma + rho}
inline double span_power(double rho, double sigma, const PhiFunction& phi, double a, double T) {
  return std::pow(span(phi, a, T), 1.0 - sigma + rho);
}

}  // namespace detail

/// Gronwall-type envelope at t: V(t) prod_{t_i < t} (1 + beta_i E_rho(g(t) Gamma(rho) y_i^rho))
/// times E_rho(g(t) Gamma(rho) y^rho), y = phi(t) - phi(a).
inline double gronwall_bound(const GronwallInputs& in, double t) {
  if (!(in.rho > 0.0 && in.rho <= 1.0)) throw ParameterError("gronwall_bound: rho must lie in (0, 1]");
  if (!(t > in.a)) throw ParameterError("gronwall_bound: requires t > a");
  if (!in.V || !in.g) throw ParameterError("gronwall_bound: V and g are required");
  if (in.betas.size() != in.impulse_times.size()) {
    throw ParameterError("gronwall_bound: betas and impulse times differ in number");
  }
  for (double b : in.betas) {
    if (!(b > 0.0)) throw ParameterError("gronwall_bound: every beta must be positive");
  }
  const double V = in.V(t);
  const double g = in.g(t);
  if (!(V >= 0.0)) throw ParameterError("gronwall_bound: V(t) must be nonnegative");
  if (!(g >= 0.0)) throw ParameterError("gronwall_bound: g(t) must be nonnegative");
  const double xa = in.phi.eval(in.a);
  const double c = g * std::tgamma(in.rho);
  double product = 1.0;
  for (std::size_t i = 0; i < in.impulse_times.size() && in.impulse_times[i] < t; ++i) {
    const double yi = in.phi.eval(in.impulse_times[i]) - xa;
    product *= 1.0 + in.betas[i] * mittag_leffler(in.rho, c * std::pow(yi, in.rho));
  }
  const double y = in.phi.eval(t) - xa;
  return V * product * mittag_leffler(in.rho, c * std::pow(y, in.rho));
}

/// A_{m,rho} = (1 + E_rho(L) / Gamma(sigma))^m E_rho(L), L = (phi(T)-phi(a))^{1-sigma+rho}.
inline double apriori_factor(int m, double rho, double sigma, const PhiFunction& phi, double a, double T) {
  if (m < 0) throw ParameterError("apriori_factor: m must be nonnegative");
  detail::check_bound_orders(rho, sigma);
  const double E = mittag_leffler(rho, detail::span_power(rho, sigma, phi, a, T));
  return std::pow(1.0 + E / std::tgamma(sigma), m) * E;
}

/// A-priori bound on the weighted norm of any solution.
inline double apriori_solution_bound(const ImpulsiveProblem& problem, double M_star, double N_star) {
  detail::check_nonnegative(M_star, "M_star");
  detail::check_nonnegative(N_star, "N_star");
  const double rho = problem.order.rho();
  const double sigma = problem.order.sigma();
  const int m = static_cast<int>(problem.impulse_count());
  const double gs = std::tgamma(sigma);
  const double A = apriori_factor(m, rho, sigma, problem.phi, problem.a, problem.T);
  const double L = detail::span_power(rho, sigma, problem.phi, problem.a, problem.T);
  return A * (std::fabs(problem.u_a) / gs + m * N_star / gs + M_star * L / std::tgamma(rho + 1.0));
}

struct SupConstants {
  double M_star = 0.0;
  double N_star = 0.0;
  double lipschitz_estimate = 0.0;
  bool lipschitz_advisory() const { return lipschitz_estimate > 1.0; }
};

/// Sampled M* = sup |f(s, 0)|, N* = max |J_k(0)| and a sampled weighted
/// Lipschitz estimate y^{sigma-1} |f(t,u) - f(t,v)| / |u - v| over random
/// pairs in [-state_range, state_range].
inline SupConstants estimate_sup_constants(const ImpulsiveProblem& problem, int n_samples,
                                           std::uint64_t seed = 20240917, double state_range = 10.0) {
  if (n_samples < 2) throw ParameterError("estimate_sup_constants: requires at least 2 samples");
  problem.validate();
  SupConstants c;
  const double sigma = problem.order.sigma();
  const auto grid = WeightedGridFunction::uniform_in_phi(problem.phi, problem.a, problem.T,
                                                         static_cast<std::size_t>(n_samples));
  const double xa = problem.phi.eval(problem.a);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> state(-state_range, state_range);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    c.M_star = std::max(c.M_star, std::fabs(detail::checked_value(problem.rhs(t, 0.0), "right-hand side", t)));
    if (i == 0) continue;
    const double weight = sigma == 1.0 ? 1.0 : std::pow(problem.phi.eval(t) - xa, sigma - 1.0);
    for (int r = 0; r < 8; ++r) {
      const double u = state(rng);
      const double v = state(rng);
      if (u == v) continue;
      const double df = problem.rhs(t, u) - problem.rhs(t, v);
      c.lipschitz_estimate = std::max(c.lipschitz_estimate, weight * std::fabs(df) / std::fabs(u - v));
    }
  }
  for (const auto& J : problem.impulse_maps) {
    c.N_star = std::max(c.N_star, std::fabs(detail::checked_value(J(0.0), "impulse map", 0.0)));
  }
  return c;
}

/// Sampled zeta_k = sup |J_k(u)| over u in [-state_range, state_range]; returns the sum.
inline double estimate_impulse_bound(const ImpulsiveProblem& problem, int n_samples, double state_range) {
  if (n_samples < 2) throw ParameterError("estimate_impulse_bound: requires at least 2 samples");
  double zeta = 0.0;
  for (const auto& J : problem.impulse_maps) {
    double zk = 0.0;
    for (int i = 0; i < n_samples; ++i) {
      const double u = -state_range + 2.0 * state_range * i / (n_samples - 1);
      zk = std::max(zk, std::fabs(detail::checked_value(J(u), "impulse map", u)));
    }
    zeta += zk;
  }
  return zeta;
}

/// (du / Gamma(sigma)) A_{m,rho}
inline double ic_dependence_bound(double du, int m, double rho, double sigma, const PhiFunction& phi, double a,
                                  double T) {
  detail::check_nonnegative(du, "du");
  return du / std::tgamma(sigma) * apriori_factor(m, rho, sigma, phi, a, T);
}

/// (delta_a / Gamma(sigma) + m eps_J / Gamma(sigma) + L eps_f / Gamma(rho + 1)) A_{m,rho}
inline double data_dependence_bound(double delta_a, double eps_f, double eps_J, int m, double rho, double sigma,
                                    const PhiFunction& phi, double a, double T) {
  detail::check_nonnegative(delta_a, "delta_a");
  detail::check_nonnegative(eps_f, "eps_f");
  detail::check_nonnegative(eps_J, "eps_J");
  const double gs = std::tgamma(sigma);
  const double L = detail::span_power(rho, sigma, phi, a, T);
  const double bracket = delta_a / gs + m * eps_J / gs + L * eps_f / std::tgamma(rho + 1.0);
  return bracket * apriori_factor(m, rho, sigma, phi, a, T);
}

/// B(t) for the order-perturbed problem (rho - delta, nu), whose weight
/// exponent is sigma* = sigma + delta (nu - 1):
///   |u_a / G(sigma) - v_a y^{delta(nu-1)} / G(sigma*)|
///   + zeta |1 / G(sigma) - y^{delta(nu-1)} / G(sigma*)|
///   + |f| G(sigma) (y^rho / G(sigma + rho) - y^{rho-delta} / G(sigma + rho - delta)).
inline double order_dependence_envelope(double t, double delta, double u_a, double v_a, double zeta, double f_norm,
                                        const FractionalOrder& order, const PhiFunction& phi, double a) {
  const double rho = order.rho();
  const double nu = order.nu();
  const double sigma = order.sigma();
  if (!(delta > 0.0 && delta < rho)) throw ParameterError("order_dependence_bound: requires 0 < delta < rho");
  if (!(t > a)) throw ParameterError("order_dependence_bound: requires t > a");
  detail::check_nonnegative(zeta, "zeta");
  detail::check_nonnegative(f_norm, "f_norm");
  const double sigma_star = sigma + delta * (nu - 1.0);
  const double y = phi.eval(t) - phi.eval(a);
  const double shift = std::pow(y, delta * (nu - 1.0));
  const double gs = std::tgamma(sigma);
  const double gss = std::tgamma(sigma_star);
  const double initial = std::fabs(u_a / gs - v_a * shift / gss);
  const double impulses = zeta * std::fabs(1.0 / gs - shift / gss);
  const double source = f_norm * gs *
                        (std::pow(y, rho) / std::tgamma(sigma + rho) -
                         std::pow(y, rho - delta) / std::tgamma(sigma + rho - delta));
  return initial + impulses + source;
}

/// B(t) A_{m,rho}
inline double order_dependence_bound(double t, double delta, double u_a, double v_a, double zeta, double f_norm,
                                     const FractionalOrder& order, const PhiFunction& phi, double a, double T,
                                     int m) {
  const double B = order_dependence_envelope(t, delta, u_a, v_a, zeta, f_norm, order, phi, a);
  return B * apriori_factor(m, order.rho(), order.sigma(), phi, a, T);
}

/// C_{m,rho} = A_{m,rho} (m / Gamma(sigma) + L / Gamma(rho + 1))
inline double uh_constant(int m, double rho, double sigma, const PhiFunction& phi, double a, double T) {
  const double A = apriori_factor(m, rho, sigma, phi, a, T);
  const double L = detail::span_power(rho, sigma, phi, a, T);
  return A * (m / std::tgamma(sigma) + L / std::tgamma(rho + 1.0));
}

/// C_{m,rho,theta} = (m / Gamma(sigma) + lambda_theta (phi(T)-phi(a))^{1-sigma}) A_{m,rho}
inline double uhr_constant(int m, double rho, double sigma, double lambda_theta, const PhiFunction& phi, double a,
                           double T) {
  if (!(lambda_theta > 0.0)) throw ParameterError("uhr_constant: lambda_theta must be positive");
  const double A = apriori_factor(m, rho, sigma, phi, a, T);
  return (m / std::tgamma(sigma) + lambda_theta * std::pow(detail::span(phi, a, T), 1.0 - sigma)) * A;
}

/// Smallest sampled lambda with I^{rho;phi} theta <= lambda theta on the
/// grid, inflated by 5%. theta must be positive and nondecreasing on (a, T].
inline double fit_lambda_theta(const Expression& theta, double rho, const PhiFunction& phi, double a, double T,
                               int n_nodes) {
  if (n_nodes < 3) throw ParameterError("fit_lambda_theta: requires at least 3 nodes");
  auto grid = WeightedGridFunction::uniform_in_phi(phi, a, T, static_cast<std::size_t>(n_nodes));
  const auto theta_fn = bind_time_expression(theta, phi);
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = theta_fn(grid[i]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(values[i] > 0.0)) {
      std::ostringstream os;
      os << "theta must be positive on (a, T]; theta(" << grid[i] << ") = " << values[i];
      throw HypothesisError(os.str());
    }
    if (values[i] < values[i - 1]) {
      std::ostringstream os;
      os << "theta must be nondecreasing; theta decreases at t=" << grid[i];
      throw HypothesisError(os.str());
    }
  }
  const auto g = WeightedGridFunction::from_weighted(phi, a, 1.0, grid, theta_fn);
  double lambda = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    lambda = std::max(lambda, frac_integral(g, rho, grid[i]) / values[i]);
  }
  return 1.05 * lambda;
}

struct StabilityConstants {
  double A_factor = 0.0;
  double C_uh = 0.0;
  double C_uhr = 0.0;
  double lambda_theta = 0.0;
  double chi = 0.0;
  double epsilon = 0.0;
  double M_star = 0.0;
  double N_star = 0.0;
  double zeta = 0.0;
  double delta_a = 0.0;
  double eps_f = 0.0;
  double eps_J = 0.0;
  double lipschitz_estimate = 0.0;
};

/// Every constant for a problem. C_uhr and lambda_theta stay 0 without theta.
inline StabilityConstants stability_constants(const ImpulsiveProblem& problem,
                                              const std::optional<Expression>& theta = std::nullopt,
                                              double chi = 0.0, double epsilon = 0.0, int n_samples = 257,
                                              std::uint64_t seed = 20240917) {
  StabilityConstants c;
  const double rho = problem.order.rho();
  const double sigma = problem.order.sigma();
  const int m = static_cast<int>(problem.impulse_count());
  c.A_factor = apriori_factor(m, rho, sigma, problem.phi, problem.a, problem.T);
  c.C_uh = uh_constant(m, rho, sigma, problem.phi, problem.a, problem.T);
  if (theta) {
    c.lambda_theta = fit_lambda_theta(*theta, rho, problem.phi, problem.a, problem.T, n_samples);
    c.C_uhr = uhr_constant(m, rho, sigma, c.lambda_theta, problem.phi, problem.a, problem.T);
  }
  c.chi = chi;
  c.epsilon = epsilon;
  const auto sup = estimate_sup_constants(problem, n_samples, seed);
  c.M_star = sup.M_star;
  c.N_star = sup.N_star;
  c.lipschitz_estimate = sup.lipschitz_estimate;
  c.zeta = estimate_impulse_bound(problem, n_samples, 10.0);
  return c;
}

}  // namespace phihilfer
