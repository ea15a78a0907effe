#pragma once

// Subcommands behind the phi_hilfer executable. Each returns a process exit
// status; run_command maps library exceptions onto the exit-code contract.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "phihilfer/bounds.hpp"
#include "phihilfer/config.hpp"
#include "phihilfer/oracles.hpp"
#include "phihilfer/solver.hpp"
#include "phihilfer/stability.hpp"

namespace phihilfer::cli {

enum ExitCode : int {
  kSuccess = 0,
  kConfigError = 2,
  kValidationError = 3,
  kNonConvergence = 4,
  kIoError = 5,
  kBoundViolation = 6,
};

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Loads a config and checks phi on [a, T] before anything is solved.
inline ProblemConfig load_validated(const std::string& path) {
  auto cfg = load_config(path);
  const auto& p = cfg.problem;
  const auto report = validate_phi(p.phi, p.a, p.T, 200);
  if (!report.pass) throw ExpressionConfigError("phi: " + report.message);
  return cfg;
}

/// Writes text to path, or to out when path is empty.
inline void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open output file " + path);
  f << text;
  f.flush();
  if (!f) throw IoError("error while writing output file " + path);
}

inline std::string summary_path(const std::string& out_path) {
  return out_path.empty() ? std::string() : out_path + ".summary.json";
}

inline void emit_summary(const std::string& out_path, const Json& summary, std::ostream& out) {
  const std::string text = summary.dump(2) + "\n";
  if (!out_path.empty()) emit(summary_path(out_path), text, out);
  out << text;
}

inline HarnessSettings harness_settings(const ProblemConfig& cfg) {
  HarnessSettings hs;
  hs.solver = cfg.solver;
  hs.bound_scale = cfg.bound_scale;
  return hs;
}

inline std::string solution_csv(const PiecewiseSolution& sol) {
  std::ostringstream os;
  os << "subinterval_index,t,phi_t,weighted_value,raw_value\n";
  const double sigma = sol.sigma();
  for (std::size_t j = 0; j < sol.node_count(); ++j) {
    os << (j == 0 ? 0 : sol.segment_of(j)) << ',' << fmt(sol.t[j]) << ',' << fmt(sol.x[j]) << ','
       << fmt(sol.w[j]) << ',';
    if (j == 0) {
      if (sigma == 1.0) os << fmt(sol.u_a);
    } else {
      const double y = sol.x[j] - sol.x_origin();
      os << fmt(sigma == 1.0 ? sol.w[j] : sol.w[j] * std::pow(y, sigma - 1.0));
    }
    os << '\n';
  }
  return os.str();
}

inline int cmd_solve(const std::string& config_path, const std::string& out_path, std::ostream& out) {
  const auto cfg = load_validated(config_path);
  const auto& p = cfg.problem;
  const auto sol = solve_picard(p, cfg.solver);
  const auto sup = estimate_sup_constants(p, 257, waveform_seed_from_env());
  const double bound = apriori_solution_bound(p, sup.M_star, sup.N_star);
  double norm = 0.0;
  for (double w : sol.w) norm = std::max(norm, std::fabs(w));
  const double res = residual(p, sol, cfg.residual_probes);

  emit(out_path, solution_csv(sol), out);
  Json s;
  s["command"] = "solve";
  s["nodes"] = sol.node_count();
  s["iterations"] = sol.iteration_count;
  s["picard_update"] = sol.final_picard_residual;
  s["residual"] = res;
  s["weighted_norm"] = norm;
  s["apriori_bound"] = bound;
  s["apriori_dominates"] = norm <= bound;
  s["M_star"] = sup.M_star;
  s["N_star"] = sup.N_star;
  if (!out_path.empty()) emit_summary(out_path, s, out);
  else std::cerr << s.dump(2) << "\n";
  return kSuccess;
}

inline int cmd_bounds(const std::string& config_path, std::ostream& out) {
  const auto cfg = load_validated(config_path);
  const auto& p = cfg.problem;
  std::optional<Expression> theta;
  double chi = 0.0;
  double eps = 0.0;
  if (cfg.uhr) {
    theta = cfg.uhr->spec.theta;
    chi = cfg.uhr->spec.chi;
    eps = cfg.uhr->spec.epsilon;
  }
  const auto c = stability_constants(p, theta, chi, eps, 257, waveform_seed_from_env());
  auto row = [&](const char* name, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-16s %.17g\n", name, v);
    out << buf;
  };
  out << "quantity         value\n";
  row("m", static_cast<double>(p.impulse_count()));
  row("rho", p.order.rho());
  row("sigma", p.order.sigma());
  row("A_factor", c.A_factor);
  row("C_uh", c.C_uh);
  if (theta) {
    row("lambda_theta", c.lambda_theta);
    row("C_uhr", c.C_uhr);
  }
  row("M_star", c.M_star);
  row("N_star", c.N_star);
  row("lipschitz_est", c.lipschitz_estimate);
  if (c.lipschitz_estimate > 1.0) {
    out << "advisory: sampled weighted Lipschitz estimate " << fmt(c.lipschitz_estimate)
        << " exceeds 1; the constants above assume a Lipschitz constant of at most 1\n";
  } else {
    out << "lipschitz: sampled estimate within the assumed constant 1\n";
  }
  return kSuccess;
}

inline std::string report_csv(const BoundReport& r) {
  std::ostringstream os;
  os << "t,empirical,theoretical,margin\n";
  for (std::size_t i = 0; i < r.t.size(); ++i) {
    os << fmt(r.t[i]) << ',' << fmt(r.empirical[i]) << ',' << fmt(r.theoretical[i]) << ','
       << fmt(r.theoretical[i] - r.empirical[i]) << '\n';
  }
  return os.str();
}

inline Json report_summary(const BoundReport& r) {
  Json s;
  s["command"] = "verify";
  s["check"] = r.check;
  s["bound"] = r.provenance;
  s["pass"] = r.pass;
  s["theoretical_bound"] = r.theoretical_bound;
  s["empirical"] = r.empirical_quantity;
  s["margin"] = r.margin;
  s["numerical_slack"] = r.numerical_slack;
  Json params = Json::object();
  for (const auto& [k, v] : r.parameters) params[k] = v;
  s["parameters"] = params;
  return s;
}

inline int cmd_verify(const std::string& config_path, const std::string& mode, const std::string& out_path,
                      std::ostream& out) {
  const auto cfg = load_validated(config_path);
  const auto& p = cfg.problem;
  const auto hs = harness_settings(cfg);
  auto missing = [&](const char* block) {
    return ConfigError(std::string("config: verify --mode ") + mode + " needs perturbations." + block);
  };
  BoundReport r;
  if (mode == "uh") {
    if (!cfg.uh) throw missing("uh");
    r = check_uh(p, cfg.uh->spec, hs);
  } else if (mode == "uhr") {
    if (!cfg.uhr) throw missing("uhr");
    r = check_uhr(p, cfg.uhr->spec, hs);
  } else if (mode == "ic") {
    if (!cfg.ic) throw missing("ic");
    r = check_ic_dependence(p, cfg.ic->v_a, hs);
  } else if (mode == "data") {
    if (!cfg.data) throw missing("data");
    r = check_data_dependence(p, cfg.data->perturbed, hs);
  } else if (mode == "order") {
    if (!cfg.order) throw missing("order");
    r = check_order_dependence(p, cfg.order->delta, hs);
  } else {
    throw ConfigError("verify: unknown mode " + mode);
  }
  emit(out_path, report_csv(r), out);
  const auto s = report_summary(r);
  if (!out_path.empty()) emit_summary(out_path, s, out);
  else std::cerr << s.dump(2) << "\n";
  return r.pass ? kSuccess : kBoundViolation;
}

struct ConvergenceLevel {
  int nodes = 0;
  double difference = std::nan("");  // against the previous level
  double order = std::nan("");
  double true_error = std::nan("");
};

inline std::vector<ConvergenceLevel> convergence_study(const ProblemConfig& cfg, int levels) {
  if (levels < 3) throw ConfigError("convergence: --levels must be at least 3");
  const auto& p = cfg.problem;
  std::vector<std::future<PiecewiseSolution>> jobs;
  for (int i = 0; i < levels; ++i) {
    SolverSettings s = cfg.solver;
    s.nodes_per_subinterval = cfg.solver.nodes_per_subinterval << i;
    jobs.push_back(std::async(std::launch::async, [&p, s] { return solve_picard(p, s); }));
  }
  std::vector<PiecewiseSolution> sols;
  for (auto& j : jobs) sols.push_back(j.get());

  std::vector<ConvergenceLevel> out(levels);
  for (int i = 0; i < levels; ++i) {
    const auto& s = sols[i];
    out[i].nodes = cfg.solver.nodes_per_subinterval << i;
    if (i > 0) {
      const auto& c = sols[i - 1];
      double d = 0.0;
      for (std::size_t j = 0; j < c.node_count(); ++j) d = std::max(d, std::fabs(s.w[2 * j] - c.w[j]));
      out[i].difference = d;
    }
    if (i > 1) out[i].order = std::log2(out[i - 1].difference / out[i].difference);
    if (cfg.oracle) {
      double e = 0.0;
      for (std::size_t j = 0; j < s.node_count(); ++j) {
        const double exact = cfg.oracle->kind == OracleSpec::Kind::homogeneous
                                 ? homogeneous_weighted_oracle(p, s.t[j])
                                 : linear_weighted_oracle(p, cfg.oracle->lambda, s.t[j]);
        e = std::max(e, std::fabs(s.w[j] - exact));
      }
      out[i].true_error = e;
    }
  }
  return out;
}

/// The linear oracle is only meaningful when f(t, u) = lambda u.
inline void check_linear_oracle(const ProblemConfig& cfg) {
  if (!cfg.oracle || cfg.oracle->kind != OracleSpec::Kind::linear) return;
  const auto& p = cfg.problem;
  for (double t : {0.25, 0.5, 0.75}) {
    const double tt = p.a + t * (p.T - p.a);
    for (double u : {-2.0, 0.5, 3.0}) {
      const double f = p.rhs(tt, u);
      if (std::fabs(f - cfg.oracle->lambda * u) > 1e-12 * (1.0 + std::fabs(f))) {
        throw ConfigError("config: oracle.linear requires rhs = lambda*u");
      }
    }
  }
}

inline int cmd_convergence(const std::string& config_path, int levels, const std::string& out_path,
                           std::ostream& out) {
  const auto cfg = load_validated(config_path);
  check_linear_oracle(cfg);
  const auto rows = convergence_study(cfg, levels);
  std::ostringstream os;
  os << "level,nodes_per_subinterval,difference,observed_order,true_error\n";
  auto cell = [](double v) { return std::isnan(v) ? std::string() : fmt(v); };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << i << ',' << rows[i].nodes << ',' << cell(rows[i].difference) << ',' << cell(rows[i].order) << ','
       << cell(rows[i].true_error) << '\n';
  }
  emit(out_path, os.str(), out);
  Json s;
  s["command"] = "convergence";
  s["levels"] = levels;
  s["oracle"] = cfg.oracle ? (cfg.oracle->kind == OracleSpec::Kind::homogeneous ? "homogeneous" : "linear") : "none";
  s["observed_order"] = rows.back().order;
  if (cfg.oracle) {
    s["true_error"] = rows.back().true_error;
    // errors at the noise floor make the observed order meaningless
    if (rows.back().true_error > 1e-12) {
      s["oracle_order"] = std::log2(rows[rows.size() - 2].true_error / rows.back().true_error);
    }
  }
  if (!out_path.empty()) emit_summary(out_path, s, out);
  else std::cerr << s.dump(2) << "\n";
  return kSuccess;
}

/// Runs a subcommand and maps exceptions to exit codes, messages to err.
inline int run_command(const std::function<int()>& command, std::ostream& err) {
  try {
    return command();
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << " (last update " << fmt(e.last_residual()) << " after " << e.iterations()
        << " iterations)\n";
    return kNonConvergence;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const HypothesisError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const EvalError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kValidationError;
  }
}

}  // namespace phihilfer::cli
