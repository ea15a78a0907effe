#pragma once

// JSON problem documents: problem, solver settings and perturbation blocks.
//
// {
//   "order": {"rho": 0.7, "nu": 0.5},
//   "phi": {"kind": "identity" | "log" | "power" | "expr", "p": 2, "phi": "...", "dphi": "..."},
//   "interval": {"a": 0, "T": 1},
//   "u_a": 1,
//   "rhs": "<expression in t, u>",
//   "impulses": [{"t": 0.5, "map": "<expression in u>"}],
//   "solver": {"nodes_per_subinterval": 256, "tol": 1e-10, "max_iter": 500},
//   "residual_probes": 20,
//   "oracle": {"kind": "homogeneous"} | {"kind": "linear", "lambda": -1},
//   "perturbations": {"uh": {...}, "uhr": {...}, "ic": {...}, "data": {...}, "order": {...}}
// }

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "phihilfer/errors.hpp"
#include "phihilfer/expr.hpp"
#include "phihilfer/phi_kernel.hpp"
#include "phihilfer/solver.hpp"
#include "phihilfer/stability.hpp"

namespace phihilfer {

using Json = nlohmann::json;

/// Expression parse failures and phi validation failures.
class ExpressionConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Unreadable or unwritable files.
class IoError : public Error {
 public:
  using Error::Error;
};

struct OracleSpec {
  enum class Kind { homogeneous, linear };
  Kind kind = Kind::homogeneous;
  double lambda = 0.0;
};

struct UhBlock {
  PerturbationSpec spec;
};

struct UhrBlock {
  PerturbationSpec spec;
};

struct IcBlock {
  double v_a = 0.0;
};

struct DataBlock {
  ImpulsiveProblem perturbed;
};

struct OrderBlock {
  double delta = 0.0;
};

struct ProblemConfig {
  ImpulsiveProblem problem;
  SolverSettings solver;
  int residual_probes = 20;
  std::optional<OracleSpec> oracle;
  std::optional<UhBlock> uh;
  std::optional<UhrBlock> uhr;
  std::optional<IcBlock> ic;
  std::optional<DataBlock> data;
  std::optional<OrderBlock> order;
  /// Test-only multiplier on every certified envelope.
  double bound_scale = 1.0;
  Json document;
};

namespace detail {

inline std::string json_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

inline const Json& require(const Json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError("config: missing key " + json_path(where, key));
  return obj.at(key);
}

inline double number_at(const Json& obj, const std::string& key, const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_number()) throw ConfigError("config: " + json_path(where, key) + " must be a number");
  return v.get<double>();
}

inline double number_or(const Json& obj, const std::string& key, const std::string& where, double fallback) {
  return obj.contains(key) ? number_at(obj, key, where) : fallback;
}

inline int integer_or(const Json& obj, const std::string& key, const std::string& where, int fallback) {
  if (!obj.contains(key)) return fallback;
  const Json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError("config: " + json_path(where, key) + " must be an integer");
  return v.get<int>();
}

inline std::string string_at(const Json& obj, const std::string& key, const std::string& where) {
  const Json& v = require(obj, key, where);
  if (!v.is_string()) throw ConfigError("config: " + json_path(where, key) + " must be a string");
  return v.get<std::string>();
}

inline Expression parse_expression(const std::string& text, const std::set<std::string>& vars, bool allow_phi,
                                   const std::string& where) {
  try {
    return Expression::parse(text, vars, allow_phi);
  } catch (const SyntaxError& e) {
    throw ExpressionConfigError("config: " + where + ": " + e.what());
  }
}

inline PhiFunction parse_phi(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: phi must be an object");
  const std::string kind = string_at(j, "kind", "phi");
  if (kind == "identity") return PhiFunction::identity();
  if (kind == "log") return PhiFunction::logarithm();
  if (kind == "power") {
    const double p = number_at(j, "p", "phi");
    if (!(p > 0.0)) throw ConfigError("config: phi.p must be positive");
    return PhiFunction::power(p);
  }
  if (kind == "expr") {
    auto phi = parse_expression(string_at(j, "phi", "phi"), {"t"}, false, "phi.phi");
    std::optional<Expression> dphi;
    if (j.contains("dphi")) dphi = parse_expression(string_at(j, "dphi", "phi"), {"t"}, false, "phi.dphi");
    return PhiFunction::expression(std::move(phi), std::move(dphi));
  }
  throw ConfigError("config: phi.kind must be identity, log, power or expr, got " + kind);
}

inline Json phi_to_json(const PhiFunction& phi) {
  switch (phi.kind()) {
    case PhiKind::identity:
      return {{"kind", "identity"}};
    case PhiKind::logarithm:
      return {{"kind", "log"}};
    case PhiKind::power:
      return {{"kind", "power"}, {"p", phi.exponent()}};
    case PhiKind::expression: {
      Json j{{"kind", "expr"}, {"phi", phi.phi_expression().to_string()}};
      if (phi.dphi_expression()) j["dphi"] = phi.dphi_expression()->to_string();
      return j;
    }
  }
  return {};
}

inline Waveform parse_waveform(const Json& parent, const std::string& where, std::uint64_t seed) {
  if (!parent.contains("waveform")) return Waveform::constant();
  const Json& j = parent.at("waveform");
  const std::string w = json_path(where, "waveform");
  const std::string kind = string_at(j, "kind", w);
  if (kind == "constant") return Waveform::constant(number_or(j, "level", w, 1.0));
  if (kind == "sin") return Waveform::sine(number_at(j, "omega", w));
  if (kind == "random") {
    std::uint64_t s = seed;
    if (j.contains("seed")) {
      const Json& sj = j.at("seed");
      if (!sj.is_number_integer() || sj.get<long long>() < 0) throw ConfigError("config: " + w + ".seed must be a nonnegative integer");
      s = waveform_seed_from_env(j.at("seed").get<std::uint64_t>());
    }
    return Waveform::random_steps(integer_or(j, "pieces", w, 16), s);
  }
  if (kind == "expr") return Waveform::expression(parse_expression(string_at(j, "expr", w), {"t"}, true, w + ".expr"));
  throw ConfigError("config: " + w + ".kind must be constant, sin, random or expr");
}

inline std::vector<int> parse_signs(const Json& parent, const std::string& where) {
  std::vector<int> signs;
  if (!parent.contains("impulse_signs")) return signs;
  const Json& j = parent.at("impulse_signs");
  if (!j.is_array()) throw ConfigError("config: " + where + ".impulse_signs must be an array");
  for (const auto& s : j) {
    if (!s.is_number_integer()) throw ConfigError("config: " + where + ".impulse_signs must hold integers");
    signs.push_back(s.get<int>());
  }
  return signs;
}

}  // namespace detail

/// Builds a problem and its blocks from a JSON document. Throws ConfigError
/// for schema problems and ExpressionConfigError for bad expressions.
inline ProblemConfig parse_config(const Json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw ConfigError("config: document must be a JSON object");
  ProblemConfig cfg;
  cfg.document = doc;
  auto& p = cfg.problem;

  const Json& order = require(doc, "order", "");
  try {
    p.order = FractionalOrder(number_at(order, "rho", "order"), number_at(order, "nu", "order"));
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  p.phi = doc.contains("phi") ? parse_phi(doc.at("phi")) : PhiFunction::identity();
  const Json& interval = require(doc, "interval", "");
  p.a = number_at(interval, "a", "interval");
  p.T = number_at(interval, "T", "interval");
  if (!(p.a < p.T)) throw ConfigError("config: interval requires a < T");
  p.u_a = number_at(doc, "u_a", "");
  p.set_rhs(parse_expression(string_at(doc, "rhs", ""), {"t", "u"}, true, "rhs"));

  if (doc.contains("impulses")) {
    const Json& imp = doc.at("impulses");
    if (!imp.is_array()) throw ConfigError("config: impulses must be an array");
    for (std::size_t k = 0; k < imp.size(); ++k) {
      const std::string where = "impulses[" + std::to_string(k) + "]";
      const double tk = number_at(imp[k], "t", where);
      p.add_impulse(tk, parse_expression(string_at(imp[k], "map", where), {"u"}, true, where + ".map"));
    }
  }
  try {
    p.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (doc.contains("solver")) {
    const Json& s = doc.at("solver");
    cfg.solver.nodes_per_subinterval = integer_or(s, "nodes_per_subinterval", "solver", cfg.solver.nodes_per_subinterval);
    cfg.solver.tol = number_or(s, "tol", "solver", cfg.solver.tol);
    cfg.solver.max_iter = integer_or(s, "max_iter", "solver", cfg.solver.max_iter);
    if (cfg.solver.nodes_per_subinterval < 8) throw ConfigError("config: solver.nodes_per_subinterval must be >= 8");
    if (!(cfg.solver.tol > 0.0)) throw ConfigError("config: solver.tol must be positive");
    if (cfg.solver.max_iter < 1) throw ConfigError("config: solver.max_iter must be >= 1");
  }
  cfg.residual_probes = integer_or(doc, "residual_probes", "", cfg.residual_probes);
  if (cfg.residual_probes < 1) throw ConfigError("config: residual_probes must be >= 1");
  cfg.bound_scale = number_or(doc, "_test_bound_scale", "", 1.0);

  if (doc.contains("oracle")) {
    const Json& o = doc.at("oracle");
    const std::string kind = string_at(o, "kind", "oracle");
    OracleSpec spec;
    if (kind == "homogeneous") {
      spec.kind = OracleSpec::Kind::homogeneous;
    } else if (kind == "linear") {
      spec.kind = OracleSpec::Kind::linear;
      spec.lambda = number_at(o, "lambda", "oracle");
      if (p.impulse_count() != 0) throw ConfigError("config: the linear oracle needs a problem without impulses");
    } else {
      throw ConfigError("config: oracle.kind must be homogeneous or linear");
    }
    cfg.oracle = spec;
  }

  const std::uint64_t seed = waveform_seed_from_env();
  if (doc.contains("perturbations")) {
    const Json& pert = doc.at("perturbations");
    if (!pert.is_object()) throw ConfigError("config: perturbations must be an object");
    for (const auto& [key, block] : pert.items()) {
      const std::string where = "perturbations." + key;
      if (!block.is_object()) throw ConfigError("config: " + where + " must be an object");
      if (key == "uh") {
        UhBlock b;
        b.spec.mode = PerturbationMode::uh;
        b.spec.epsilon = number_at(block, "epsilon", where);
        b.spec.waveform = parse_waveform(block, where, seed);
        b.spec.impulse_signs = parse_signs(block, where);
        cfg.uh = b;
      } else if (key == "uhr") {
        UhrBlock b;
        const std::string variant = block.contains("variant") ? string_at(block, "variant", where) : "scaled";
        if (variant == "scaled") {
          b.spec.mode = PerturbationMode::uhr_scaled;
          b.spec.epsilon = number_at(block, "epsilon", where);
        } else if (variant == "pair") {
          b.spec.mode = PerturbationMode::uhr_pair;
          b.spec.epsilon = 1.0;
        } else {
          throw ConfigError("config: " + where + ".variant must be scaled or pair");
        }
        b.spec.chi = number_or(block, "chi", where, 0.0);
        b.spec.theta = parse_expression(string_at(block, "theta", where), {"t"}, true, where + ".theta");
        b.spec.waveform = parse_waveform(block, where, seed);
        b.spec.impulse_signs = parse_signs(block, where);
        cfg.uhr = b;
      } else if (key == "ic") {
        cfg.ic = IcBlock{number_at(block, "v_a", where)};
      } else if (key == "data") {
        DataBlock b;
        b.perturbed = p;
        if (block.contains("rhs")) {
          b.perturbed.set_rhs(parse_expression(string_at(block, "rhs", where), {"t", "u"}, true, where + ".rhs"));
        }
        if (block.contains("impulse_maps")) {
          const Json& maps = block.at("impulse_maps");
          if (!maps.is_array() || maps.size() != p.impulse_count()) {
            throw ConfigError("config: " + where + ".impulse_maps must list one map per impulse");
          }
          for (std::size_t k = 0; k < maps.size(); ++k) {
            if (!maps[k].is_string()) throw ConfigError("config: " + where + ".impulse_maps must hold strings");
            const auto e = parse_expression(maps[k].get<std::string>(), {"u"}, true, where + ".impulse_maps");
            b.perturbed.impulse_maps[k] = ImpulsiveProblem::impulse_from(e);
            b.perturbed.impulse_expressions[k] = e;
          }
        }
        if (block.contains("u_a")) b.perturbed.u_a = number_at(block, "u_a", where);
        if (block.contains("eps_f") || block.contains("eps_J") || block.contains("delta_a")) {
          PerturbationSpec s;
          s.mode = PerturbationMode::data_shift;
          if (block.contains("eps_f")) s.eps_f = number_at(block, "eps_f", where);
          if (block.contains("eps_J")) s.eps_J = number_at(block, "eps_J", where);
          if (block.contains("delta_a")) s.delta_a = number_at(block, "delta_a", where);
          s.waveform = parse_waveform(block, where, seed);
          s.impulse_signs = parse_signs(block, where);
          try {
            b.perturbed = perturb_problem(b.perturbed, s);
          } catch (const ParameterError& e) {
            throw ConfigError("config: " + where + ": " + e.what());
          }
        }
        cfg.data = b;
      } else if (key == "order") {
        const double delta = number_at(block, "delta", where);
        if (!(delta > 0.0 && delta < p.order.rho())) throw ConfigError("config: " + where + ".delta must lie in (0, rho)");
        cfg.order = OrderBlock{delta};
      } else {
        throw ConfigError("config: unknown perturbation block " + key);
      }
    }
  }
  // perturbation specs validated against the problem up front
  try {
    if (cfg.uh) cfg.uh->spec.validate(p);
    if (cfg.uhr) cfg.uhr->spec.validate(p);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline ProblemConfig parse_config_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  try {
    return parse_config(doc);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline ProblemConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading config file " + path);
  return parse_config_text(ss.str());
}

/// Serializes a problem whose rhs and impulse maps carry expressions.
inline Json problem_to_json(const ImpulsiveProblem& p) {
  if (!p.rhs_expression) throw ConfigError("problem_to_json: right-hand side has no expression form");
  Json j;
  j["order"] = {{"rho", p.order.rho()}, {"nu", p.order.nu()}};
  j["phi"] = detail::phi_to_json(p.phi);
  j["interval"] = {{"a", p.a}, {"T", p.T}};
  j["u_a"] = p.u_a;
  j["rhs"] = p.rhs_expression->to_string();
  j["impulses"] = Json::array();
  for (std::size_t k = 0; k < p.impulse_count(); ++k) {
    if (!p.impulse_expressions[k]) throw ConfigError("problem_to_json: impulse map has no expression form");
    j["impulses"].push_back({{"t", p.impulse_times[k]}, {"map", p.impulse_expressions[k]->to_string()}});
  }
  return j;
}

}  // namespace phihilfer
