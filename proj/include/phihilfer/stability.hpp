#pragma once

// Perturbed problems and numerical certificates that solved deviations stay
// under the closed-form envelopes of bounds.hpp.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <future>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "phihilfer/bounds.hpp"
#include "phihilfer/errors.hpp"
#include "phihilfer/expr.hpp"
#include "phihilfer/phi_kernel.hpp"
#include "phihilfer/solver.hpp"

namespace phihilfer {

inline constexpr std::uint64_t kDefaultWaveformSeed = 20240917;

/// Seed for random waveforms: PHI_HILFER_SEED when set, else the default.
inline std::uint64_t waveform_seed_from_env(std::uint64_t fallback = kDefaultWaveformSeed) {
  const char* s = std::getenv("PHI_HILFER_SEED");
  if (s == nullptr || *s == '\0') return fallback;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (end == s || *end != '\0') throw ParameterError("PHI_HILFER_SEED must be a nonnegative integer");
  return static_cast<std::uint64_t>(v);
}

enum class WaveformKind { constant, sine, random_steps, expression };

/// Shape of the perturbation E(t), bounded by 1 in magnitude.
class Waveform {
 public:
  static Waveform constant(double level = 1.0) {
    Waveform w;
    w.kind_ = WaveformKind::constant;
    w.level_ = level;
    return w;
  }
  /// sin(omega (phi(t) - phi(a)))
  static Waveform sine(double omega) {
    Waveform w;
    w.kind_ = WaveformKind::sine;
    w.omega_ = omega;
    return w;
  }
  /// Piecewise constant on `pieces` cells uniform in phi, levels uniform in [-1, 1].
  static Waveform random_steps(int pieces, std::uint64_t seed) {
    if (pieces < 1) throw ParameterError("waveform: random steps need at least one piece");
    Waveform w;
    w.kind_ = WaveformKind::random_steps;
    w.seed_ = seed;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    w.levels_.resize(static_cast<std::size_t>(pieces));
    for (double& v : w.levels_) v = U(rng);
    return w;
  }
  static Waveform expression(Expression e) {
    Waveform w;
    w.kind_ = WaveformKind::expression;
    w.expr_ = std::move(e);
    return w;
  }

  WaveformKind kind() const { return kind_; }
  double omega() const { return omega_; }
  double level() const { return level_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<double>& levels() const { return levels_; }
  const std::optional<Expression>& expr() const { return expr_; }

  /// Value at t for a problem on [a, T] with kernel phi.
  double eval(double t, const PhiFunction& phi, double a, double T) const {
    switch (kind_) {
      case WaveformKind::constant:
        return level_;
      case WaveformKind::sine:
        return std::sin(omega_ * (phi.eval(t) - phi.eval(a)));
      case WaveformKind::random_steps: {
        const double xa = phi.eval(a);
        const double r = (phi.eval(t) - xa) / (phi.eval(T) - xa);
        const auto n = levels_.size();
        const auto i = std::min(n - 1, static_cast<std::size_t>(std::max(0.0, r) * static_cast<double>(n)));
        return levels_[i];
      }
      case WaveformKind::expression:
        return bind_time_expression(*expr_, phi)(t);
    }
    return 0.0;
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind_) {
      case WaveformKind::constant:
        os << "constant " << level_;
        break;
      case WaveformKind::sine:
        os << "sin(" << omega_ << " (phi(t)-phi(a)))";
        break;
      case WaveformKind::random_steps:
        os << "random steps (" << levels_.size() << " pieces, seed " << seed_ << ")";
        break;
      case WaveformKind::expression:
        os << expr_->to_string();
        break;
    }
    return os.str();
  }

 private:
  WaveformKind kind_ = WaveformKind::constant;
  double level_ = 1.0;
  double omega_ = 1.0;
  std::uint64_t seed_ = 0;
  std::vector<double> levels_;
  std::optional<Expression> expr_;
};

enum class PerturbationMode { uh, uhr_pair, uhr_scaled, ic_shift, data_shift, order_shift };

inline const char* to_string(PerturbationMode m) {
  switch (m) {
    case PerturbationMode::uh: return "uh";
    case PerturbationMode::uhr_pair: return "uhr_pair";
    case PerturbationMode::uhr_scaled: return "uhr_scaled";
    case PerturbationMode::ic_shift: return "ic_shift";
    case PerturbationMode::data_shift: return "data_shift";
    case PerturbationMode::order_shift: return "order_shift";
  }
  return "?";
}

struct PerturbationSpec {
  PerturbationMode mode = PerturbationMode::uh;
  double epsilon = 0.0;
  double chi = 0.0;
  std::optional<Expression> theta;
  Waveform waveform = Waveform::constant();
  /// Signs of the impulse defects; empty means all +1.
  std::vector<int> impulse_signs;
  std::optional<double> delta_a;
  std::optional<double> eps_f;
  std::optional<double> eps_J;
  std::optional<double> delta_order;

  int sign(std::size_t k) const { return impulse_signs.empty() ? 1 : impulse_signs[k]; }

  void validate(const ImpulsiveProblem& problem, int n_samples = 201) const {
    auto need = [&](bool ok, const char* what) {
      if (!ok) {
        std::ostringstream os;
        os << "perturbation (" << to_string(mode) << "): " << what;
        throw ParameterError(os.str());
      }
    };
    need(epsilon >= 0.0 && std::isfinite(epsilon), "epsilon must be finite and nonnegative");
    need(chi >= 0.0 && std::isfinite(chi), "chi must be finite and nonnegative");
    need(impulse_signs.empty() || impulse_signs.size() == problem.impulse_count(),
         "impulse_signs must have one entry per impulse");
    for (int s : impulse_signs) need(s == 1 || s == -1, "impulse signs must be +1 or -1");
    const auto grid = WeightedGridFunction::uniform_in_phi(problem.phi, problem.a, problem.T,
                                                           static_cast<std::size_t>(n_samples));
    for (double t : grid) {
      need(std::fabs(waveform.eval(t, problem.phi, problem.a, problem.T)) <= 1.0, "waveform exceeds 1 in magnitude");
    }
    switch (mode) {
      case PerturbationMode::uh:
        break;
      case PerturbationMode::uhr_pair:
      case PerturbationMode::uhr_scaled:
        need(theta.has_value(), "theta is required");
        break;
      case PerturbationMode::ic_shift:
        need(delta_a.has_value(), "delta_a is required");
        break;
      case PerturbationMode::data_shift:
        need(delta_a || eps_f || eps_J, "one of delta_a, eps_f, eps_J is required");
        need(!eps_f || *eps_f >= 0.0, "eps_f must be nonnegative");
        need(!eps_J || *eps_J >= 0.0, "eps_J must be nonnegative");
        break;
      case PerturbationMode::order_shift:
        need(delta_order.has_value(), "delta_order is required");
        need(*delta_order > 0.0 && *delta_order < problem.order.rho(), "delta_order must lie in (0, rho)");
        break;
    }
  }
};

/// The perturbed problem of spec.mode; the input problem is left untouched.
///   uh:          f + eps w(t),            J_k + eps s_k
///   uhr_pair:    f + theta(t) w(t),       J_k + chi s_k
///   uhr_scaled:  f + eps theta(t) w(t),   J_k + eps chi s_k
///   ic_shift:    u_a + delta_a
///   data_shift:  u_a + delta_a, f + eps_f w(t), J_k + eps_J s_k
///   order_shift: order (rho - delta, nu)
inline ImpulsiveProblem perturb_problem(const ImpulsiveProblem& problem, const PerturbationSpec& spec) {
  spec.validate(problem);
  ImpulsiveProblem q = problem;
  const auto phi = problem.phi;
  const double a = problem.a;
  const double T = problem.T;
  auto shift_rhs = [&](std::function<double(double)> E) {
    auto f = problem.rhs;
    q.rhs = [f, E](double t, double u) { return f(t, u) + E(t); };
    q.rhs_expression.reset();
  };
  auto shift_impulses = [&](double size) {
    for (std::size_t k = 0; k < q.impulse_maps.size(); ++k) {
      auto J = problem.impulse_maps[k];
      const double d = size * spec.sign(k);
      q.impulse_maps[k] = [J, d](double u) { return J(u) + d; };
      q.impulse_expressions[k].reset();
    }
  };
  const auto w = spec.waveform;
  switch (spec.mode) {
    case PerturbationMode::uh: {
      const double eps = spec.epsilon;
      shift_rhs([w, phi, a, T, eps](double t) { return eps * w.eval(t, phi, a, T); });
      shift_impulses(eps);
      break;
    }
    case PerturbationMode::uhr_pair:
    case PerturbationMode::uhr_scaled: {
      const double eps = spec.mode == PerturbationMode::uhr_pair ? 1.0 : spec.epsilon;
      const auto theta = bind_time_expression(*spec.theta, phi);
      shift_rhs([w, phi, a, T, eps, theta](double t) {
        const double th = theta(t);
        const double E = eps * th * w.eval(t, phi, a, T);
        return std::clamp(E, -eps * std::fabs(th), eps * std::fabs(th));
      });
      shift_impulses(eps * spec.chi);
      break;
    }
    case PerturbationMode::ic_shift:
      q.u_a = problem.u_a + *spec.delta_a;
      break;
    case PerturbationMode::data_shift: {
      q.u_a = problem.u_a + spec.delta_a.value_or(0.0);
      const double ef = spec.eps_f.value_or(0.0);
      if (ef != 0.0) shift_rhs([w, phi, a, T, ef](double t) { return ef * w.eval(t, phi, a, T); });
      const double eJ = spec.eps_J.value_or(0.0);
      if (eJ != 0.0) shift_impulses(eJ);
      break;
    }
    case PerturbationMode::order_shift:
      q.order = FractionalOrder(problem.order.rho() - *spec.delta_order, problem.order.nu());
      break;
  }
  return q;
}

struct BoundReport {
  std::string check;
  std::string provenance;
  /// Sup-norm quantities (per-node curves reduce to their extremes).
  double theoretical_bound = 0.0;
  double empirical_quantity = 0.0;
  double margin = 0.0;
  double numerical_slack = 0.0;
  bool pass = false;
  /// Per-node curves on the solution grid (t = a excluded).
  std::vector<double> t;
  std::vector<double> empirical;
  std::vector<double> theoretical;
  /// Named inputs and measured quantities (constants, measured epsilons, ...).
  std::vector<std::pair<std::string, double>> parameters;

  double parameter(const std::string& name) const {
    for (const auto& [k, v] : parameters) {
      if (k == name) return v;
    }
    throw ParameterError("report has no parameter " + name);
  }
};

struct HarnessSettings {
  SolverSettings solver;
  /// Multiplies every theoretical envelope; 1 except for forced-failure tests.
  double bound_scale = 1.0;
  int sample_points = 201;
};

namespace detail {

/// Both solves run concurrently.
inline std::pair<PiecewiseSolution, PiecewiseSolution> solve_pair(const ImpulsiveProblem& p,
                                                                  const ImpulsiveProblem& q,
                                                                  const SolverSettings& s) {
  auto fq = std::async(std::launch::async, [&] { return solve_picard(q, s); });
  auto sp = solve_picard(p, s);
  return {std::move(sp), fq.get()};
}

/// Refinement-pair estimate max |w_n - w_{n/2}| over shared nodes.
inline double refinement_error(const ImpulsiveProblem& p, const PiecewiseSolution& fine, const SolverSettings& s) {
  if (s.nodes_per_subinterval < 16) return 0.0;
  SolverSettings coarse = s;
  coarse.nodes_per_subinterval = s.nodes_per_subinterval / 2;
  const auto c = solve_picard(p, coarse);
  const std::size_t step = (fine.node_count() - 1) / (c.node_count() - 1);
  double e = 0.0;
  for (std::size_t j = 0; j < c.node_count(); ++j) e = std::max(e, std::fabs(fine.w[j * step] - c.w[j]));
  return e;
}

/// Fills slack, margin and pass from the per-node curves.
inline void finish_report(BoundReport& r, double tol, double quad_error) {
  r.numerical_slack = 10.0 * (tol + quad_error);
  r.margin = std::numeric_limits<double>::infinity();
  r.empirical_quantity = 0.0;
  r.theoretical_bound = r.theoretical.empty() ? 0.0 : r.theoretical.front();
  for (std::size_t i = 0; i < r.empirical.size(); ++i) {
    r.margin = std::min(r.margin, r.theoretical[i] - r.empirical[i]);
    r.empirical_quantity = std::max(r.empirical_quantity, r.empirical[i]);
    r.theoretical_bound = std::max(r.theoretical_bound, r.theoretical[i]);
  }
  if (r.empirical.empty()) r.margin = 0.0;
  r.pass = r.margin >= -r.numerical_slack;
  r.parameters.emplace_back("refinement_error", quad_error);
}

/// Weighted difference per node (t = a skipped) against a constant envelope.
inline BoundReport uniform_report(const PiecewiseSolution& u, const PiecewiseSolution& v, double bound) {
  BoundReport r;
  for (std::size_t j = 1; j < u.node_count(); ++j) {
    r.t.push_back(u.t[j]);
    r.empirical.push_back(std::fabs(u.w[j] - v.w[j]));
    r.theoretical.push_back(bound);
  }
  return r;
}

}  // namespace detail

/// Ulam-Hyers check: |w~ - w| <= C_{m,rho} eps.
inline BoundReport check_uh(const ImpulsiveProblem& problem, const PerturbationSpec& spec,
                            const HarnessSettings& hs = {}) {
  if (spec.mode != PerturbationMode::uh) throw ParameterError("check_uh: spec mode must be uh");
  const auto q = perturb_problem(problem, spec);
  const auto [u, v] = detail::solve_pair(problem, q, hs.solver);
  const double rho = problem.order.rho();
  const double sigma = problem.order.sigma();
  const int m = static_cast<int>(problem.impulse_count());
  const double C = uh_constant(m, rho, sigma, problem.phi, problem.a, problem.T) * hs.bound_scale;
  auto r = detail::uniform_report(u, v, C * spec.epsilon);
  r.check = "uh";
  r.provenance = "Ulam-Hyers constant C_{m,rho}";
  r.parameters = {{"epsilon", spec.epsilon}, {"C_uh", C}};
  detail::finish_report(r, hs.solver.tol, detail::refinement_error(problem, u, hs.solver));
  return r;
}

/// Ulam-Hyers-Rassias check: |w~(t) - w(t)| <= C_{m,rho,theta} eps (theta(t) + chi)
/// per node; uhr_pair uses eps = 1.
inline BoundReport check_uhr(const ImpulsiveProblem& problem, const PerturbationSpec& spec,
                             const HarnessSettings& hs = {}) {
  if (spec.mode != PerturbationMode::uhr_scaled && spec.mode != PerturbationMode::uhr_pair) {
    throw ParameterError("check_uhr: spec mode must be uhr_scaled or uhr_pair");
  }
  spec.validate(problem);
  const double rho = problem.order.rho();
  const double sigma = problem.order.sigma();
  const int m = static_cast<int>(problem.impulse_count());
  const double lambda = fit_lambda_theta(*spec.theta, rho, problem.phi, problem.a, problem.T, 257);
  const double C = uhr_constant(m, rho, sigma, lambda, problem.phi, problem.a, problem.T) * hs.bound_scale;
  const double eps = spec.mode == PerturbationMode::uhr_pair ? 1.0 : spec.epsilon;
  const auto q = perturb_problem(problem, spec);
  const auto [u, v] = detail::solve_pair(problem, q, hs.solver);
  const auto theta = bind_time_expression(*spec.theta, problem.phi);
  BoundReport r;
  for (std::size_t j = 1; j < u.node_count(); ++j) {
    r.t.push_back(u.t[j]);
    r.empirical.push_back(std::fabs(u.w[j] - v.w[j]));
    r.theoretical.push_back(C * eps * (theta(u.t[j]) + spec.chi));
  }
  r.check = "uhr";
  r.provenance = "Ulam-Hyers-Rassias constant C_{m,rho,theta}";
  r.parameters = {{"epsilon", eps}, {"chi", spec.chi}, {"lambda_theta", lambda}, {"C_uhr", C}};
  detail::finish_report(r, hs.solver.tol, detail::refinement_error(problem, u, hs.solver));
  return r;
}

/// Initial-condition dependence: |w_u - w_v| <= (|u_a - v_a| / Gamma(sigma)) A_{m,rho}.
inline BoundReport check_ic_dependence(const ImpulsiveProblem& problem, double v_a, const HarnessSettings& hs = {}) {
  ImpulsiveProblem q = problem;
  q.u_a = v_a;
  const auto [u, v] = detail::solve_pair(problem, q, hs.solver);
  const int m = static_cast<int>(problem.impulse_count());
  const double du = std::fabs(problem.u_a - v_a);
  const double bound =
      ic_dependence_bound(du, m, problem.order.rho(), problem.order.sigma(), problem.phi, problem.a, problem.T) *
      hs.bound_scale;
  auto r = detail::uniform_report(u, v, bound);
  r.check = "ic";
  r.provenance = "initial-condition dependence bound";
  r.parameters = {{"u_a", problem.u_a}, {"v_a", v_a}, {"A_factor", apriori_factor(m, problem.order.rho(),
                                                                                     problem.order.sigma(),
                                                                                     problem.phi, problem.a,
                                                                                     problem.T)}};
  detail::finish_report(r, hs.solver.tol, detail::refinement_error(problem, u, hs.solver));
  return r;
}

struct MeasuredPerturbation {
  double delta_a = 0.0;
  double eps_f = 0.0;
  double eps_J = 0.0;
};

/// Sup of |f - f~| over a phi-uniform t grid times a state grid, sup of
/// |J_k - J~_k| over the state grid, and |u_a - v_a|. The state grid spans
/// [-state_range, state_range] plus the supplied extra states.
inline MeasuredPerturbation measure_perturbation(const ImpulsiveProblem& p, const ImpulsiveProblem& q,
                                                 int n_samples, double state_range,
                                                 const std::vector<double>& extra_states = {}) {
  if (n_samples < 2) throw ParameterError("measure_perturbation: requires at least 2 samples");
  MeasuredPerturbation mp;
  mp.delta_a = std::fabs(p.u_a - q.u_a);
  std::vector<double> states(extra_states);
  for (int i = 0; i < n_samples; ++i) states.push_back(-state_range + 2.0 * state_range * i / (n_samples - 1));
  const auto grid = WeightedGridFunction::uniform_in_phi(p.phi, p.a, p.T, static_cast<std::size_t>(n_samples));
  for (std::size_t i = 1; i < grid.size(); ++i) {
    for (double u : states) mp.eps_f = std::max(mp.eps_f, std::fabs(p.rhs(grid[i], u) - q.rhs(grid[i], u)));
  }
  for (std::size_t k = 0; k < p.impulse_maps.size(); ++k) {
    for (double u : states) {
      mp.eps_J = std::max(mp.eps_J, std::fabs(p.impulse_maps[k](u) - q.impulse_maps[k](u)));
    }
  }
  return mp;
}

/// Data dependence against the bound evaluated at measured delta_a, eps_f, eps_J.
inline BoundReport check_data_dependence(const ImpulsiveProblem& problem, const ImpulsiveProblem& perturbed,
                                         const HarnessSettings& hs = {}) {
  if (problem.impulse_times != perturbed.impulse_times) {
    throw ParameterError("check_data_dependence: impulse times must agree");
  }
  if (problem.order.rho() != perturbed.order.rho() || problem.order.nu() != perturbed.order.nu()) {
    throw ParameterError("check_data_dependence: orders must agree");
  }
  if (problem.a != perturbed.a || problem.T != perturbed.T) {
    throw ParameterError("check_data_dependence: intervals must agree");
  }
  const auto [u, v] = detail::solve_pair(problem, perturbed, hs.solver);
  // states actually visited, at the nodes away from a
  std::vector<double> visited;
  double range = 10.0;
  for (std::size_t j = 1; j < u.node_count(); ++j) {
    const double y = u.x[j] - u.x.front();
    const double scale = u.sigma() == 1.0 ? 1.0 : std::pow(y, u.sigma() - 1.0);
    visited.push_back(u.w[j] * scale);
    visited.push_back(v.w[j] * scale);
  }
  for (double s : visited) range = std::max(range, std::fabs(s));
  const auto mp = measure_perturbation(problem, perturbed, hs.sample_points, std::min(range, 1e6), visited);
  const int m = static_cast<int>(problem.impulse_count());
  const double bound = data_dependence_bound(mp.delta_a, mp.eps_f, mp.eps_J, m, problem.order.rho(),
                                             problem.order.sigma(), problem.phi, problem.a, problem.T) *
                       hs.bound_scale;
  auto r = detail::uniform_report(u, v, bound);
  r.check = "data";
  r.provenance = "data dependence bound";
  r.parameters = {{"delta_a", mp.delta_a}, {"eps_f", mp.eps_f}, {"eps_J", mp.eps_J}};
  detail::finish_report(r, hs.solver.tol, detail::refinement_error(problem, u, hs.solver));
  return r;
}

/// Order dependence: (phi(t)-phi(a))^{1-sigma} |u(t) - v(t)| with v solving
/// the (rho - delta, nu) problem, against B(t) A_{m,rho} per node.
inline BoundReport check_order_dependence(const ImpulsiveProblem& problem, double delta,
                                          const HarnessSettings& hs = {}) {
  if (!(delta > 0.0 && delta < problem.order.rho())) {
    throw ParameterError("check_order_dependence: requires 0 < delta < rho");
  }
  ImpulsiveProblem q = problem;
  q.order = FractionalOrder(problem.order.rho() - delta, problem.order.nu());
  const auto [u, v] = detail::solve_pair(problem, q, hs.solver);
  const double sigma = problem.order.sigma();
  const double sigma_star = q.order.sigma();
  const std::size_t N = u.node_count();

  // sup of |J_k| over the visited left limits (widened), and the weighted
  // sup of f along both solutions
  double range = 10.0;
  double f_norm = 0.0;
  for (std::size_t j = 1; j < N; ++j) {
    const double y = u.x[j] - u.x.front();
    const double uu = u.w[j] * std::pow(y, sigma - 1.0);
    const double vv = v.w[j] * std::pow(y, sigma_star - 1.0);
    const double wt = std::pow(y, 1.0 - sigma);
    f_norm = std::max({f_norm, wt * std::fabs(problem.rhs(u.t[j], uu)), wt * std::fabs(problem.rhs(u.t[j], vv))});
  }
  for (std::size_t k = 0; k + 1 < u.segment_end.size(); ++k) {
    const std::size_t j = u.segment_end[k];
    const double y = u.x[j] - u.x.front();
    range = std::max({range, 2.0 * std::fabs(u.w[j] * std::pow(y, sigma - 1.0)),
                      2.0 * std::fabs(v.w[j] * std::pow(y, sigma_star - 1.0))});
  }
  const double zeta = estimate_impulse_bound(problem, hs.sample_points, range);
  const int m = static_cast<int>(problem.impulse_count());
  const double A = apriori_factor(m, problem.order.rho(), sigma, problem.phi, problem.a, problem.T);

  BoundReport r;
  for (std::size_t j = 1; j < N; ++j) {
    const double y = u.x[j] - u.x.front();
    r.t.push_back(u.t[j]);
    r.empirical.push_back(std::fabs(u.w[j] - v.w[j] * std::pow(y, sigma_star - sigma)));
    r.theoretical.push_back(order_dependence_envelope(u.t[j], delta, problem.u_a, q.u_a, zeta, f_norm,
                                                      problem.order, problem.phi, problem.a) *
                            A * hs.bound_scale);
  }
  r.check = "order";
  r.provenance = "order dependence bound B(t) A_{m,rho}";
  r.parameters = {{"delta", delta}, {"zeta", zeta}, {"f_norm", f_norm}, {"A_factor", A}};
  detail::finish_report(r, hs.solver.tol, detail::refinement_error(problem, u, hs.solver));
  return r;
}

}  // namespace phihilfer
