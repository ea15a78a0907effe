#pragma once

// Gamma and Mittag-Leffler functions on the real line.
//
// E_{rho,beta}(z) is evaluated by its power series for moderate z and by the
// exponential asymptotic expansion once z^{1/rho} exceeds 40. Negative
// arguments where the alternating series loses too many digits fall back to
// the algebraic asymptotic expansion (rho < 1) or to a multiprecision series.

#include <cfloat>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "phihilfer/errors.hpp"

namespace phihilfer {

/// Gamma function for positive arguments.
inline double gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    std::ostringstream os;
    os << "gamma: argument must be positive and finite, got " << x;
    throw DomainError(os.str());
  }
  const double g = std::tgamma(x);
  if (!std::isfinite(g)) throw OverflowError("gamma: result overflows double");
  return g;
}

namespace detail {

/// 1/Gamma(x) for any real x; zero at the poles.
inline double rgamma(double x) {
  if (x <= 0.0 && x == std::nearbyint(x)) return 0.0;
  const double g = std::tgamma(x);
  if (!std::isfinite(g)) return 0.0;
  return 1.0 / g;
}

struct SeriesResult {
  long double sum = 0.0L;
  long double max_term = 0.0L;
  bool converged = false;
};

constexpr int kMaxSeriesTerms = 2000;
constexpr long double kSeriesCutoff = 1e-18L;
// Asymptotic form takes over when z^{1/rho} exceeds this value.
constexpr double kAsymptoticExponent = 40.0;

inline SeriesResult ml_series(double rho, double beta, double z) {
  SeriesResult r;
  const long double lz = std::log(std::fabs(static_cast<long double>(z)));
  long double prev = std::numeric_limits<long double>::infinity();
  for (int k = 0; k < kMaxSeriesTerms; ++k) {
    const long double arg = static_cast<long double>(rho) * k + beta;
    long double mag;
    if (k == 0) {
      mag = 1.0L / std::tgamma(static_cast<long double>(beta));
    } else {
      mag = std::exp(k * lz - std::lgamma(arg));
    }
    const long double term = (z < 0.0 && (k % 2 == 1)) ? -mag : mag;
    r.sum += term;
    if (mag > r.max_term) r.max_term = mag;
    if (k > 0 && mag <= prev && mag < kSeriesCutoff * std::fabs(r.sum)) {
      r.converged = true;
      return r;
    }
    if (k > 0 && mag == 0.0L) {
      r.converged = true;
      return r;
    }
    prev = mag;
  }
  return r;
}

// Series in Digits-digit arithmetic; ok when the cancellation leaves at
// least 15 good digits.
template <unsigned Digits>
double ml_series_multiprecision(double rho, double beta, double z, bool& ok) {
  using mp = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<Digits>>;
  const mp lz = log(mp(std::fabs(z)));
  const mp cutoff = pow(mp(10), -static_cast<int>(Digits) + 20);
  mp sum = 0;
  mp max_term = 0;
  mp prev = std::numeric_limits<double>::max();
  ok = false;
  for (int k = 0; k < 20 * kMaxSeriesTerms; ++k) {
    const mp arg = mp(rho) * k + mp(beta);
    const mp mag = exp(mp(k) * lz - boost::math::lgamma(arg));
    const mp term = (z < 0.0 && (k % 2 == 1)) ? mp(-mag) : mag;
    sum += term;
    if (mag > max_term) max_term = mag;
    if (k > 0 && mag <= prev && mag < cutoff * abs(sum)) {
      ok = max_term < pow(mp(10), static_cast<int>(Digits) - 15) * abs(sum);
      return static_cast<double>(sum);
    }
    prev = mag;
  }
  return static_cast<double>(sum);
}

// -sum_{k>=1} z^{-k} / Gamma(beta - rho k), truncated at its smallest term.
inline double ml_algebraic_tail(double rho, double beta, double z, double& truncation) {
  double sum = 0.0;
  double zpow = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  truncation = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 200; ++k) {
    zpow /= z;
    const double term = -zpow * rgamma(beta - rho * k);
    const double mag = std::fabs(term);
    if (mag == 0.0) continue;  // 1/Gamma vanishes at its poles
    if (mag > prev) break;
    sum += term;
    truncation = mag;
    prev = mag;
    if (mag < 1e-18 * std::fabs(sum)) break;
  }
  if (!std::isfinite(truncation)) truncation = 0.0;
  return sum;
}

inline double ml_exponential_asymptotic(double rho, double beta, double z) {
  const double root = std::pow(z, 1.0 / rho);
  const double log_lead = root + ((1.0 - beta) / rho) * std::log(z) - std::log(rho);
  if (log_lead > std::log(DBL_MAX)) {
    throw OverflowError("mittag_leffler: result exceeds the largest finite double");
  }
  double tail_error = 0.0;
  const double tail = ml_algebraic_tail(rho, beta, z, tail_error);
  return std::exp(log_lead) + tail;
}

}  // namespace detail

/// Two-parameter Mittag-Leffler function E_{rho,beta}(z) = sum z^k / Gamma(rho k + beta).
///
/// Accepts 0 < rho <= 2 and beta > 0. Throws OverflowError when the value is
/// not representable, ParameterError for out-of-range parameters.
inline double mittag_leffler_two(double rho, double beta, double z) {
  if (!(rho > 0.0 && rho <= 2.0)) {
    std::ostringstream os;
    os << "mittag_leffler: rho must lie in (0, 2], got " << rho;
    throw ParameterError(os.str());
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw ParameterError("mittag_leffler: beta must be positive");
  }
  if (std::isnan(z)) throw DomainError("mittag_leffler: argument is NaN");
  if (z == 0.0) return 1.0 / gamma(beta);

  if (z > 0.0) {
    if (z > std::pow(detail::kAsymptoticExponent, rho)) {
      return detail::ml_exponential_asymptotic(rho, beta, z);
    }
    const auto s = detail::ml_series(rho, beta, z);
    if (!s.converged) throw DomainError("mittag_leffler: series did not converge within 2000 terms");
    if (!std::isfinite(static_cast<double>(s.sum))) {
      throw OverflowError("mittag_leffler: result exceeds the largest finite double");
    }
    return static_cast<double>(s.sum);
  }

  // z < 0: alternating series, guarded against cancellation.
  if (std::isfinite(z)) {
    const auto s = detail::ml_series(rho, beta, z);
    const long double err = s.max_term * LDBL_EPSILON * 64.0L;
    if (s.converged && err <= 1e-12L * std::fabs(s.sum)) return static_cast<double>(s.sum);
  }
  if (rho < 1.0) {
    double truncation = 0.0;
    const double value = detail::ml_algebraic_tail(rho, beta, z, truncation);
    if (truncation <= 1e-11 * std::fabs(value)) return value;
  }
  if (std::isfinite(z)) {
    // Peak term is about exp(|z|^{1/rho}); pick enough digits to absorb it.
    const double peak_digits = std::pow(std::fabs(z), 1.0 / rho) / std::log(10.0);
    bool ok = false;
    double value = 0.0;
    if (peak_digits < 30.0) {
      value = detail::ml_series_multiprecision<50>(rho, beta, z, ok);
    } else if (peak_digits < 80.0) {
      value = detail::ml_series_multiprecision<100>(rho, beta, z, ok);
    } else if (peak_digits < 180.0) {
      value = detail::ml_series_multiprecision<200>(rho, beta, z, ok);
    }
    if (ok) return value;
  }
  if (rho == 1.0 && beta == 1.0) return std::exp(z);
  std::ostringstream os;
  os << "mittag_leffler: cannot reach the accuracy contract at rho=" << rho << ", beta=" << beta
     << ", z=" << z;
  throw DomainError(os.str());
}

/// One-parameter Mittag-Leffler function E_rho(z).
inline double mittag_leffler(double rho, double z) { return mittag_leffler_two(rho, 1.0, z); }

}  // namespace phihilfer
