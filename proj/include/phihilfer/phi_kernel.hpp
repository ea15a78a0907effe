#pragma once

// The kernel-generating function phi of the phi-fractional operators: an
// increasing C^1 map with phi' > 0. Built-in families plus user expressions.

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "phihilfer/errors.hpp"
#include "phihilfer/expr.hpp"

namespace phihilfer {

enum class PhiKind { identity, logarithm, power, expression };

class PhiFunction {
 public:
  /// phi(t) = t
  static PhiFunction identity() { return PhiFunction(PhiKind::identity); }

  /// phi(t) = ln t, defined for t > 0
  static PhiFunction logarithm() { return PhiFunction(PhiKind::logarithm); }

  /// phi(t) = t^p, defined for t >= 0
  static PhiFunction power(double p) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw ParameterError("power kernel: exponent must be positive");
    }
    PhiFunction f(PhiKind::power);
    f.exponent_ = p;
    return f;
  }

  /// User kernel. Without a derivative expression phi' falls back to a
  /// central difference with h = 1e-6 (1 + |t|).
  static PhiFunction expression(Expression phi, std::optional<Expression> dphi = std::nullopt) {
    if (phi.empty()) throw ParameterError("expression kernel: phi expression is empty");
    PhiFunction f(PhiKind::expression);
    f.phi_expr_ = std::move(phi);
    f.dphi_expr_ = std::move(dphi);
    return f;
  }

  static PhiFunction expression(std::string_view phi_text,
                                std::optional<std::string_view> dphi_text = std::nullopt) {
    auto phi = Expression::parse(phi_text, {"t"}, false);
    std::optional<Expression> dphi;
    if (dphi_text) dphi = Expression::parse(*dphi_text, {"t"}, false);
    return expression(std::move(phi), std::move(dphi));
  }

  PhiKind kind() const { return kind_; }
  double exponent() const { return exponent_; }
  bool has_derivative_expression() const { return dphi_expr_.has_value(); }
  const Expression& phi_expression() const { return phi_expr_; }
  const std::optional<Expression>& dphi_expression() const { return dphi_expr_; }

  double operator()(double t) const { return eval(t); }

  double eval(double t) const {
    switch (kind_) {
      case PhiKind::identity:
        return t;
      case PhiKind::logarithm:
        if (!(t > 0.0)) domain_fail("logarithm", t);
        return std::log(t);
      case PhiKind::power:
        if (t < 0.0) domain_fail("power", t);
        return std::pow(t, exponent_);
      case PhiKind::expression:
        return eval_expr(phi_expr_, t);
    }
    return t;
  }

  double deriv(double t) const {
    switch (kind_) {
      case PhiKind::identity:
        return 1.0;
      case PhiKind::logarithm:
        if (!(t > 0.0)) domain_fail("logarithm", t);
        return 1.0 / t;
      case PhiKind::power:
        if (t < 0.0 || (t == 0.0 && exponent_ < 1.0)) domain_fail("power derivative", t);
        return exponent_ * std::pow(t, exponent_ - 1.0);
      case PhiKind::expression: {
        if (dphi_expr_) return eval_expr(*dphi_expr_, t);
        const double h = 1e-6 * (1.0 + std::fabs(t));
        return (eval_expr(phi_expr_, t + h) - eval_expr(phi_expr_, t - h)) / (2.0 * h);
      }
    }
    return 1.0;
  }

  /// phi^{-1}(x) for x in [phi(lo), phi(hi)]. Closed form for built-ins,
  /// bisection for user expressions.
  double inverse(double x, double lo, double hi) const {
    switch (kind_) {
      case PhiKind::identity:
        return x;
      case PhiKind::logarithm:
        return std::exp(x);
      case PhiKind::power:
        return std::pow(x, 1.0 / exponent_);
      case PhiKind::expression:
        break;
    }
    double flo = eval(lo);
    double fhi = eval(hi);
    if (x <= flo) return lo;
    if (x >= fhi) return hi;
    for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() *
                                                 std::max(1.0, std::fabs(hi));
         ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = eval(mid);
      if (fm < x) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
        fhi = fm;
      }
    }
    // Linear interpolation inside the final bracket.
    return fhi > flo ? lo + (hi - lo) * (x - flo) / (fhi - flo) : 0.5 * (lo + hi);
  }

  std::string describe() const {
    std::ostringstream os;
    switch (kind_) {
      case PhiKind::identity:
        os << "identity";
        break;
      case PhiKind::logarithm:
        os << "log";
        break;
      case PhiKind::power:
        os << "power(p=" << exponent_ << ")";
        break;
      case PhiKind::expression:
        os << "expr(" << phi_expr_.source() << ")";
        break;
    }
    return os.str();
  }

  /// Callable view usable as the phi() binding of an Expression.
  std::function<double(double)> as_function() const {
    auto self = std::make_shared<const PhiFunction>(*this);
    return [self](double t) { return self->eval(t); };
  }

 private:
  explicit PhiFunction(PhiKind k) : kind_(k) {}

  [[noreturn]] static void domain_fail(const char* what, double t) {
    std::ostringstream os;
    os << what << " kernel evaluated outside its domain at t=" << t;
    throw DomainError(os.str());
  }

  static double eval_expr(const Expression& e, double t) {
    try {
      return e.eval(Bindings::at(t));
    } catch (const EvalError& err) {
      throw DomainError(std::string("kernel expression: ") + err.what());
    }
  }

  PhiKind kind_;
  double exponent_ = 1.0;
  Expression phi_expr_;
  std::optional<Expression> dphi_expr_;
};

inline double phi_eval(const PhiFunction& phi, double t) { return phi.eval(t); }
inline double phi_deriv(const PhiFunction& phi, double t) { return phi.deriv(t); }

struct PhiValidation {
  bool pass = true;
  std::string message;
  std::optional<double> first_violation;  // sample point where the check failed
};

/// Sampling check that phi is strictly increasing with phi' > 0 on [a, T].
/// phi' is skipped at an endpoint where it is singular (e.g. t^p, p < 1, at 0).
inline PhiValidation validate_phi(const PhiFunction& phi, double a, double T, int n_samples) {
  if (!(a < T)) throw ParameterError("validate_phi: requires a < T");
  if (n_samples < 2) throw ParameterError("validate_phi: requires at least 2 samples");
  PhiValidation report;
  auto fail = [&](double t, std::string msg) {
    report.pass = false;
    report.first_violation = t;
    report.message = std::move(msg);
    return report;
  };
  double prev = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    const double t = i + 1 == n_samples ? T : a + (T - a) * i / (n_samples - 1);
    double value = 0.0;
    double slope = 0.0;
    try {
      value = phi.eval(t);
    } catch (const DomainError& e) {
      std::ostringstream os;
      os << "phi is not defined at t=" << t << ": " << e.what();
      return fail(t, os.str());
    }
    if (!std::isfinite(value)) {
      std::ostringstream os;
      os << "phi is not finite at t=" << t;
      return fail(t, os.str());
    }
    bool have_slope = true;
    try {
      slope = phi.deriv(t);
    } catch (const DomainError& e) {
      if (i != 0 && i + 1 != n_samples) {
        std::ostringstream os;
        os << "phi' is not defined at t=" << t << ": " << e.what();
        return fail(t, os.str());
      }
      have_slope = false;
    }
    if (i > 0 && !(value > prev)) {
      std::ostringstream os;
      os << "phi is not strictly increasing: phi(" << t << ")=" << value
         << " <= previous sample " << prev;
      return fail(t, os.str());
    }
    if (have_slope && !(slope > 0.0)) {
      std::ostringstream os;
      os << "phi' must be positive, got phi'(" << t << ")=" << slope;
      return fail(t, os.str());
    }
    prev = value;
  }
  report.message = "phi is strictly increasing with positive derivative on all samples";
  return report;
}

}  // namespace phihilfer
