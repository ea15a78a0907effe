#pragma once

// Impulsive phi-Hilfer initial-value problems
//
//   D^{rho,nu;phi} u(t) = f(t, u(t)),               t in (a, T] \ {t_k}
//   Delta I^{1-sigma;phi} u(t_k) = J_k(u(t_k^-)),    k = 1..m
//   I^{1-sigma;phi} u(a) = u_a
//
// solved through the equivalent integral equation in the weighted variable
// w = (phi(t) - phi(a))^{1-sigma} u:
//
//   w(t) = (u_a + sum_{t_i < t} J_i(u(t_i^-))) / Gamma(sigma)
//          + (phi(t) - phi(a))^{1-sigma} I^{rho;phi} f(t, u(t)).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "phihilfer/errors.hpp"
#include "phihilfer/expr.hpp"
#include "phihilfer/frac_calc.hpp"
#include "phihilfer/phi_kernel.hpp"
#include "phihilfer/special_functions.hpp"

namespace phihilfer {

/// (rho, nu) with sigma = rho + nu - rho nu. An optional delta > 0 describes
/// the perturbed order rho - delta, whose sigma is sigma + delta (nu - 1).
class FractionalOrder {
 public:
  FractionalOrder(double rho, double nu, std::optional<double> delta = std::nullopt)
      : rho_(rho), nu_(nu), delta_(delta) {
    if (!(rho > 0.0 && rho < 1.0)) {
      std::ostringstream os;
      os << "order: rho must lie in (0, 1), got " << rho;
      throw ParameterError(os.str());
    }
    if (!(nu >= 0.0 && nu <= 1.0)) {
      std::ostringstream os;
      os << "order: nu must lie in [0, 1], got " << nu;
      throw ParameterError(os.str());
    }
    if (delta && !(*delta > 0.0 && *delta < rho)) {
      throw ParameterError("order: delta must satisfy 0 < delta < rho");
    }
  }

  double rho() const { return rho_; }
  double nu() const { return nu_; }
  /// Exact at the Riemann-Liouville (nu = 0) and Caputo (nu = 1) ends.
  double sigma() const { return nu_ == 0.0 ? rho_ : 1.0 - (1.0 - rho_) * (1.0 - nu_); }
  std::optional<double> delta() const { return delta_; }

  double sigma_star() const {
    if (!delta_) throw ParameterError("order: sigma_star needs delta");
    return sigma() + *delta_ * (nu_ - 1.0);
  }

  /// The order (rho - delta, nu).
  FractionalOrder perturbed() const {
    if (!delta_) throw ParameterError("order: perturbed order needs delta");
    return FractionalOrder(rho_ - *delta_, nu_);
  }

 private:
  double rho_;
  double nu_;
  std::optional<double> delta_;
};

/// Expression in t with phi(...) bound to the given kernel.
inline std::function<double(double)> bind_time_expression(const Expression& e, const PhiFunction& phi) {
  auto fn = std::make_shared<const std::function<double(double)>>(phi.as_function());
  return [e, fn](double t) {
    Bindings b = Bindings::at(t);
    b.phi = fn.get();
    return e.eval(b);
  };
}

using RhsFunction = std::function<double(double t, double u)>;
using ImpulseMap = std::function<double(double u)>;

struct ImpulsiveProblem {
  FractionalOrder order{0.5, 1.0};
  PhiFunction phi = PhiFunction::identity();
  double a = 0.0;
  double T = 1.0;
  double u_a = 0.0;
  RhsFunction rhs;
  std::vector<double> impulse_times;
  std::vector<ImpulseMap> impulse_maps;
  // Source expressions when the problem came from text; used for reporting.
  std::optional<Expression> rhs_expression;
  std::vector<std::optional<Expression>> impulse_expressions;

  std::size_t impulse_count() const { return impulse_times.size(); }

  void validate() const {
    if (!(a < T)) throw ParameterError("problem: requires a < T");
    if (!std::isfinite(u_a)) throw ParameterError("problem: u_a must be finite");
    if (!rhs) throw ParameterError("problem: right-hand side missing");
    if (impulse_times.size() != impulse_maps.size()) {
      throw ParameterError("problem: impulse times and maps differ in number");
    }
    double prev = a;
    for (double tk : impulse_times) {
      if (!(tk > prev && tk < T)) {
        throw ParameterError("problem: impulse times must be increasing and strictly inside (a, T)");
      }
      prev = tk;
    }
    for (const auto& J : impulse_maps) {
      if (!J) throw ParameterError("problem: impulse map missing");
    }
  }

  /// f(t, u) from an expression in t and u; phi(...) inside refers to this problem's kernel.
  static RhsFunction rhs_from(const Expression& e, const PhiFunction& phi) {
    auto fn = std::make_shared<const std::function<double(double)>>(phi.as_function());
    return [e, fn](double t, double u) {
      Bindings b = Bindings::at(t, u);
      b.phi = fn.get();
      return e.eval(b);
    };
  }

  static ImpulseMap impulse_from(const Expression& e) {
    return [e](double u) { return e.eval(Bindings::state(u)); };
  }

  void set_rhs(const Expression& e) {
    rhs = rhs_from(e, phi);
    rhs_expression = e;
  }

  void add_impulse(double t_k, const Expression& e) {
    impulse_times.push_back(t_k);
    impulse_maps.push_back(impulse_from(e));
    impulse_expressions.emplace_back(e);
  }

  void add_impulse(double t_k, ImpulseMap J) {
    impulse_times.push_back(t_k);
    impulse_maps.push_back(std::move(J));
    impulse_expressions.emplace_back(std::nullopt);
  }
};

struct SolverSettings {
  int nodes_per_subinterval = 256;
  double tol = 1e-10;
  int max_iter = 500;
};

/// Result of solve_picard. Segment k covers (t_k, t_{k+1}] (segment 0 also
/// contains a); the node at an impulse time carries the left limit.
struct PiecewiseSolution {
  FractionalOrder order{0.5, 1.0};
  PhiFunction phi = PhiFunction::identity();
  double a = 0.0;
  double T = 1.0;
  double u_a = 0.0;
  std::vector<double> impulse_times;

  std::vector<WeightedGridFunction> segments;
  /// w(t_k^+) for k = 1..m at index k; index 0 holds w(a) = u_a / Gamma(sigma).
  std::vector<double> start_limits;
  /// S_k = sum_{i<=k} J_i(u(t_i^-)); S_0 = 0.
  std::vector<double> jump_sums;
  /// J_k(u(t_k^-)) at index k - 1.
  std::vector<double> impulse_values;

  int iteration_count = 0;
  double final_picard_residual = 0.0;
  std::vector<double> update_norms;

  // Concatenated nodes: t, x = phi(t), w (left limits) and each segment's last index.
  std::vector<double> t;
  std::vector<double> x;
  std::vector<double> w;
  std::vector<std::size_t> segment_end;

  double sigma() const { return order.sigma(); }
  double x_origin() const { return x.front(); }
  std::size_t node_count() const { return t.size(); }

  /// Segment index of global node j.
  std::size_t segment_of(std::size_t j) const {
    return static_cast<std::size_t>(std::lower_bound(segment_end.begin(), segment_end.end(), j) -
                                    segment_end.begin());
  }

  /// Continuous weighted function over the whole interval: the solution with
  /// the impulse contributions of the segment-k constant removed, so that it
  /// coincides with w on segment k.
  WeightedGridFunction continuous_part(std::size_t k) const {
    WeightedGridFunction g;
    g.phi = phi;
    g.a = a;
    g.sigma = sigma();
    const std::size_t n = segment_end[k] + 1;
    g.grid.assign(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(n));
    g.weighted_values.resize(n);
    const double gs = std::tgamma(sigma());
    for (std::size_t j = 0; j < n; ++j) {
      g.weighted_values[j] = w[j] - (jump_sums[segment_of(j)] - jump_sums[k]) / gs;
    }
    return g;
  }

  /// All weighted values as one grid function (discontinuous at impulses).
  WeightedGridFunction as_grid_function() const {
    WeightedGridFunction g;
    g.phi = phi;
    g.a = a;
    g.sigma = sigma();
    g.grid = t;
    g.weighted_values = w;
    return g;
  }
};

namespace detail {

inline double checked_value(double v, const char* what, double t) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << what << " is not finite at t=" << t;
    throw EvalError(os.str());
  }
  return v;
}

}  // namespace detail

/// Fixed point of the discretized integral operator by Picard iteration.
///
/// The grid is uniform in phi on every subinterval with
/// nodes_per_subinterval cells. The integrand is split as y^{sigma-1} H with
/// H = y^{1-sigma} f; H is interpolated linearly in y^rho, the variable in
/// which solutions are smooth at a, and integrated exactly against the
/// kernel over the full history from a.
inline PiecewiseSolution solve_picard(const ImpulsiveProblem& problem, int nodes_per_subinterval, double tol,
                                      int max_iter) {
  problem.validate();
  if (nodes_per_subinterval < 8) throw ParameterError("solve_picard: nodes_per_subinterval must be at least 8");
  if (!(tol > 0.0)) throw ParameterError("solve_picard: tol must be positive");
  if (max_iter < 1) throw ParameterError("solve_picard: max_iter must be at least 1");
  {
    const auto report = validate_phi(problem.phi, problem.a, problem.T, 200);
    if (!report.pass) throw ValidationError(report.message);
  }

  const double rho = problem.order.rho();
  const double sigma = problem.order.sigma();
  const double gs = std::tgamma(sigma);
  const std::size_t m = problem.impulse_count();
  const auto n = static_cast<std::size_t>(nodes_per_subinterval);

  PiecewiseSolution sol;
  sol.order = problem.order;
  sol.phi = problem.phi;
  sol.a = problem.a;
  sol.T = problem.T;
  sol.u_a = problem.u_a;
  sol.impulse_times = problem.impulse_times;

  // Grid
  std::vector<double> breaks{problem.a};
  breaks.insert(breaks.end(), problem.impulse_times.begin(), problem.impulse_times.end());
  breaks.push_back(problem.T);
  sol.t.push_back(problem.a);
  sol.x.push_back(problem.phi.eval(problem.a));
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double X0 = problem.phi.eval(breaks[k]);
    const double X1 = problem.phi.eval(breaks[k + 1]);
    for (std::size_t j = 1; j <= n; ++j) {
      const double xj = j == n ? X1 : X0 + (X1 - X0) * static_cast<double>(j) / static_cast<double>(n);
      sol.x.push_back(xj);
      sol.t.push_back(j == n ? breaks[k + 1] : problem.phi.inverse(xj, breaks[k], breaks[k + 1]));
    }
    sol.segment_end.push_back(sol.t.size() - 1);
  }
  const std::size_t N = sol.t.size();
  const double x0 = sol.x.front();
  std::vector<double> y(N), ypow(N), ypow_inv(N);
  for (std::size_t j = 0; j < N; ++j) {
    y[j] = sol.x[j] - x0;
    ypow[j] = sigma == 1.0 ? 1.0 : std::pow(y[j], 1.0 - sigma);      // y^{1-sigma}
    ypow_inv[j] = sigma == 1.0 ? 1.0 : std::pow(y[j], sigma - 1.0);  // y^{sigma-1}
  }
  std::vector<std::size_t> seg(N);
  for (std::size_t j = 0; j < N; ++j) seg[j] = sol.segment_of(j);

  const ProductQuadrature quad(sol.x, rho, sigma - 1.0, rho);

  // Impulse sums from the left limits of w at the impulse nodes.
  auto jump_sums_of = [&](const std::vector<double>& w, std::vector<double>& values) {
    std::vector<double> S(m + 1, 0.0);
    values.assign(m, 0.0);
    for (std::size_t k = 1; k <= m; ++k) {
      const std::size_t j = sol.segment_end[k - 1];
      const double u_left = w[j] * ypow_inv[j];
      values[k - 1] = detail::checked_value(problem.impulse_maps[k - 1](u_left), "impulse map", sol.t[j]);
      S[k] = S[k - 1] + values[k - 1];
    }
    return S;
  };

  // Initial iterate: homogeneous term, impulse sums resolved segment by segment.
  std::vector<double> w(N);
  {
    double C = problem.u_a;
    for (std::size_t j = 0; j < N; ++j) {
      w[j] = C / gs;
      const std::size_t k = seg[j];
      if (k < m && j == sol.segment_end[k]) {
        C += detail::checked_value(problem.impulse_maps[k](w[j] * ypow_inv[j]), "impulse map", sol.t[j]);
      }
    }
  }

  std::vector<double> Hm(N), Hp(N), w_next(N), values;
  auto build_integrand = [&](const std::vector<double>& wv, const std::vector<double>& S) {
    for (std::size_t j = 1; j < N; ++j) {
      Hm[j] = ypow[j] * detail::checked_value(problem.rhs(sol.t[j], wv[j] * ypow_inv[j]), "right-hand side",
                                              sol.t[j]);
      Hp[j] = Hm[j];
      const std::size_t k = seg[j];
      if (k < m && j == sol.segment_end[k]) {
        const double w_right = wv[j] + (S[k + 1] - S[k]) / gs;
        Hp[j] = ypow[j] * detail::checked_value(problem.rhs(sol.t[j], w_right * ypow_inv[j]),
                                                "right-hand side", sol.t[j]);
      }
    }
    double h0 = std::numeric_limits<double>::quiet_NaN();
    if (sigma == 1.0) {
      try {
        h0 = problem.rhs(sol.t[0], wv[0]);
      } catch (const Error&) {
      }
    }
    if (!std::isfinite(h0)) {
      // linear in y^rho through nodes 1 and 2
      const double s1 = std::pow(y[1], rho), s2 = std::pow(y[2], rho);
      h0 = Hp[1] - (Hp[2] - Hp[1]) * s1 / (s2 - s1);
    }
    Hm[0] = Hp[0] = h0;
  };

  sol.update_norms.clear();
  int iter = 0;
  double update = std::numeric_limits<double>::infinity();
  while (true) {
    const auto S = jump_sums_of(w, values);
    build_integrand(w, S);
    w_next[0] = problem.u_a / gs;
    for (std::size_t j = 1; j < N; ++j) {
      w_next[j] = (problem.u_a + S[seg[j]]) / gs + ypow[j] * quad.integrate(j, Hm, Hp);
    }
    update = 0.0;
    for (std::size_t j = 0; j < N; ++j) update = std::max(update, std::fabs(w_next[j] - w[j]));
    if (std::isnan(update)) update = std::numeric_limits<double>::infinity();
    w.swap(w_next);
    ++iter;
    sol.update_norms.push_back(update);
    if (update <= tol) break;
    if (!std::isfinite(update) || iter >= max_iter) {
      std::ostringstream os;
      os << "Picard iteration did not converge after " << iter << " iterations (last update " << update
         << ", tolerance " << tol << ")";
      throw ConvergenceError(os.str(), update, iter);
    }
  }

  sol.w = w;
  sol.iteration_count = iter;
  sol.final_picard_residual = update;
  sol.jump_sums = jump_sums_of(w, sol.impulse_values);
  sol.start_limits.assign(m + 1, 0.0);
  sol.start_limits[0] = problem.u_a / gs;
  for (std::size_t k = 1; k <= m; ++k) {
    const std::size_t j = sol.segment_end[k - 1];
    sol.start_limits[k] = w[j] + sol.impulse_values[k - 1] / gs;
  }
  std::size_t begin = 0;
  for (std::size_t k = 0; k <= m; ++k) {
    WeightedGridFunction g;
    g.phi = problem.phi;
    g.a = problem.a;
    g.sigma = sigma;
    const std::size_t end = sol.segment_end[k];
    g.grid.assign(sol.t.begin() + static_cast<std::ptrdiff_t>(begin),
                  sol.t.begin() + static_cast<std::ptrdiff_t>(end + 1));
    g.weighted_values.assign(w.begin() + static_cast<std::ptrdiff_t>(begin),
                             w.begin() + static_cast<std::ptrdiff_t>(end + 1));
    sol.segments.push_back(std::move(g));
    begin = end + 1;
  }
  return sol;
}

inline PiecewiseSolution solve_picard(const ImpulsiveProblem& problem, const SolverSettings& s) {
  return solve_picard(problem, s.nodes_per_subinterval, s.tol, s.max_iter);
}

struct EvaluatedValue {
  double value = 0.0;
  /// True when value is the weighted limit at t = a (sigma < 1).
  bool is_weighted = false;
};

/// Weighted value w(t), interpolated linearly in phi inside the subinterval
/// containing t. At an impulse time the left limit is returned.
inline double evaluate_weighted(const PiecewiseSolution& sol, double t) {
  if (!(t >= sol.a && t <= sol.T)) {
    std::ostringstream os;
    os << "evaluate: t=" << t << " outside [" << sol.a << ", " << sol.T << "]";
    throw DomainError(os.str());
  }
  if (t == sol.a) return sol.start_limits[0];
  const std::size_t k = static_cast<std::size_t>(
      std::lower_bound(sol.impulse_times.begin(), sol.impulse_times.end(), t) - sol.impulse_times.begin());
  const std::size_t first = k == 0 ? 1 : sol.segment_end[k - 1] + 1;
  const std::size_t last = sol.segment_end[k];
  const auto it = std::lower_bound(sol.t.begin() + static_cast<std::ptrdiff_t>(first),
                                   sol.t.begin() + static_cast<std::ptrdiff_t>(last + 1), t);
  const auto j = static_cast<std::size_t>(it - sol.t.begin());
  if (sol.t[j] == t) return sol.w[j];
  const double X = sol.phi.eval(t);
  const double xl = sol.x[j - 1];
  const double wl = j == first ? sol.start_limits[k] : sol.w[j - 1];
  const double th = (X - xl) / (sol.x[j] - xl);
  return (1.0 - th) * wl + th * sol.w[j];
}

/// u(t) for a < t <= T. At t = a with sigma < 1 the weighted limit
/// u_a / Gamma(sigma) is returned and flagged.
inline EvaluatedValue evaluate(const PiecewiseSolution& sol, double t) {
  const double wv = evaluate_weighted(sol, t);
  const double sigma = sol.sigma();
  if (sigma == 1.0) return {wv, false};
  if (t == sol.a) return {wv, true};
  const double y = sol.phi.eval(t) - sol.x_origin();
  return {wv * std::pow(y, sigma - 1.0), false};
}

/// max over interior probe nodes of |D^{rho,nu;phi} u - f(t, u)|. Probe
/// nodes stay at least one cell away from a, T and every impulse time.
inline double residual(const ImpulsiveProblem& problem, const PiecewiseSolution& sol, int probe_points) {
  if (probe_points < 1) throw ParameterError("residual: need at least one probe point");
  const std::size_t m = sol.segment_end.size() - 1;
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k <= m; ++k) {
    const std::size_t first = k == 0 ? 2 : sol.segment_end[k - 1] + 1;
    const std::size_t last = sol.segment_end[k] - 1;
    for (std::size_t j = first; j <= last; ++j) candidates.push_back(j);
  }
  if (candidates.empty()) return 0.0;
  std::vector<std::size_t> probes;
  const auto P = std::min<std::size_t>(static_cast<std::size_t>(probe_points), candidates.size());
  for (std::size_t i = 0; i < P; ++i) {
    const std::size_t idx = P == 1 ? candidates.size() / 2 : i * (candidates.size() - 1) / (P - 1);
    if (probes.empty() || probes.back() != candidates[idx]) probes.push_back(candidates[idx]);
  }
  const double rho = sol.order.rho();
  const double nu = sol.order.nu();
  double worst = 0.0;
  for (std::size_t k = 0; k <= m; ++k) {
    std::vector<std::size_t> rows;
    for (std::size_t j : probes) {
      if (sol.segment_of(j) == k) rows.push_back(j);
    }
    if (rows.empty()) continue;
    const auto v = sol.continuous_part(k);
    const auto D = hilfer_derivative_nodes(sol.phi, rho, nu, v, rows);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t j = rows[i];
      const double u = v.raw_value(j);
      const double f = problem.rhs(sol.t[j], u);
      worst = std::max(worst, std::fabs(D[i] - f));
    }
  }
  return worst;
}

/// Jump of the weighted fractional integral at t_k (k = 1..m):
/// Gamma(sigma) (w(t_k^+) - w(t_k^-)). Right after an impulse w behaves like
/// A + B d^rho + C d with d = phi(t) - phi(t_k); w(t_k^+) = A is fitted
/// through the first three nodes to the right of t_k.
inline double impulse_jump(const PiecewiseSolution& sol, std::size_t k) {
  if (k < 1 || k >= sol.segment_end.size()) throw ParameterError("impulse_jump: impulse index out of range");
  const std::size_t j = sol.segment_end[k - 1];
  const double rho = sol.order.rho();
  double d[3], p[3], w[3];
  for (int i = 0; i < 3; ++i) {
    d[i] = sol.x[j + 1 + i] - sol.x[j];
    p[i] = std::pow(d[i], rho);
    w[i] = sol.w[j + 1 + i];
  }
  // Cramer's rule for [1 p d] (A B C)^T = w
  auto det3 = [](const double c0[3], const double c1[3], const double c2[3]) {
    return c0[0] * (c1[1] * c2[2] - c1[2] * c2[1]) - c1[0] * (c0[1] * c2[2] - c0[2] * c2[1]) +
           c2[0] * (c0[1] * c1[2] - c0[2] * c1[1]);
  };
  const double ones[3] = {1.0, 1.0, 1.0};
  const double w_right = det3(w, p, d) / det3(ones, p, d);
  return std::tgamma(sol.sigma()) * (w_right - sol.w[j]);
}

}  // namespace phihilfer
