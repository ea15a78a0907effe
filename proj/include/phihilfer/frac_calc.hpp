#pragma once

// phi-fractional integral, phi-Hilfer derivative and the weighted sup-norm.
//
// Integrals are computed after the substitution x = phi(s), which turns the
// phi-Riemann-Liouville integral into the classical one in x. The integrand
// is written as y^gamma * H(x) with y = x - phi(a); H is interpolated
// piecewise linearly and the kernel (X - x)^{order-1} y^gamma is integrated
// exactly against each linear piece (product integration).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "phihilfer/errors.hpp"
#include "phihilfer/phi_kernel.hpp"
#include "phihilfer/special_functions.hpp"

namespace phihilfer {

/// Samples of a function in the weighted representation
/// w_i = (phi(t_i) - phi(a))^{1-sigma} u(t_i).
struct WeightedGridFunction {
  std::vector<double> grid;
  std::vector<double> weighted_values;
  double sigma = 1.0;
  PhiFunction phi = PhiFunction::identity();
  double a = 0.0;

  std::size_t size() const { return grid.size(); }

  std::vector<double> phi_nodes() const {
    std::vector<double> x(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) x[i] = phi.eval(grid[i]);
    return x;
  }

  /// u(t_i). Throws DomainError at t_i = a when sigma < 1.
  double raw_value(std::size_t i) const {
    const double y = phi.eval(grid[i]) - phi.eval(a);
    if (sigma == 1.0) return weighted_values[i];
    if (!(y > 0.0)) throw DomainError("raw value is unbounded at t = a when sigma < 1");
    return weighted_values[i] * std::pow(y, sigma - 1.0);
  }

  void validate() const {
    if (grid.empty()) throw ParameterError("grid function: empty grid");
    if (grid.size() != weighted_values.size()) {
      throw ParameterError("grid function: grid and values differ in length");
    }
    if (!(sigma > 0.0 && sigma <= 1.0)) throw ParameterError("grid function: sigma must lie in (0, 1]");
    if (grid.front() < a) throw ParameterError("grid function: grid starts before a");
    for (std::size_t i = 1; i < grid.size(); ++i) {
      if (!(grid[i] > grid[i - 1])) throw ParameterError("grid function: grid not strictly increasing");
    }
    for (double w : weighted_values) {
      if (!std::isfinite(w)) throw ParameterError("grid function: non-finite weighted value");
    }
  }

  static WeightedGridFunction from_weighted(const PhiFunction& phi, double a, double sigma,
                                            std::vector<double> grid,
                                            const std::function<double(double)>& w) {
    WeightedGridFunction g;
    g.phi = phi;
    g.a = a;
    g.sigma = sigma;
    g.weighted_values.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) g.weighted_values[i] = w(grid[i]);
    g.grid = std::move(grid);
    g.validate();
    return g;
  }

  /// Samples a raw function u. Requires grid[0] > a unless sigma = 1.
  static WeightedGridFunction from_raw(const PhiFunction& phi, double a, double sigma,
                                       std::vector<double> grid,
                                       const std::function<double(double)>& u) {
    const double xa = phi.eval(a);
    return from_weighted(phi, a, sigma, std::move(grid), [&](double t) {
      const double y = phi.eval(t) - xa;
      if (sigma == 1.0) return u(t);
      if (!(y > 0.0)) throw DomainError("from_raw: weighted value at t = a needs the weighted form");
      return std::pow(y, 1.0 - sigma) * u(t);
    });
  }

  /// Grid uniform in phi between a and T (n_nodes nodes, endpoints included).
  static std::vector<double> uniform_in_phi(const PhiFunction& phi, double a, double T,
                                            std::size_t n_nodes) {
    if (n_nodes < 2) throw ParameterError("uniform grid needs at least 2 nodes");
    const double xa = phi.eval(a);
    const double xT = phi.eval(T);
    std::vector<double> t(n_nodes);
    t.front() = a;
    t.back() = T;
    for (std::size_t i = 1; i + 1 < n_nodes; ++i) {
      const double x = xa + (xT - xa) * static_cast<double>(i) / static_cast<double>(n_nodes - 1);
      t[i] = phi.inverse(x, a, T);
    }
    return t;
  }
};

/// max_i |w_i|
inline double weighted_norm(const WeightedGridFunction& u) {
  double m = 0.0;
  for (double w : u.weighted_values) m = std::max(m, std::fabs(w));
  return m;
}

namespace detail {

struct CellMoments {
  double m0 = 0.0;  // int (L-y)^{order-1} y^gamma dy
  double m1 = 0.0;  // int (L-y)^{order-1} y^gamma (y - lo) dy
};

// gamma = 0: closed form, with a binomial series for thin cells far from L.
inline CellMoments plain_moments(double L, double lo, double hi, double order) {
  const double A = L - lo;
  const double h = hi - lo;
  const double eps = h / A;
  CellMoments m;
  if (eps <= 0.25) {
    double c = 1.0;
    double epow = eps;
    double s0 = 0.0;
    double s1 = 0.0;
    for (int k = 0; k < 200; ++k) {
      const double t0 = c * epow / (k + 1);
      const double t1 = c * epow * eps / (k + 2);
      s0 += t0;
      s1 += t1;
      if (std::fabs(t0) <= 1e-17 * std::fabs(s0)) break;
      c *= (k + 1 - order) / (k + 1);
      epow *= eps;
      if (c == 0.0) break;
    }
    const double Ar = std::pow(A, order);
    m.m0 = Ar * s0;
    m.m1 = Ar * A * s1;
    return m;
  }
  const double B = std::max(L - hi, 0.0);
  const double Ar = std::pow(A, order);
  const double Br = std::pow(B, order);
  // A^order - B^order without cancellation
  const double diff = B > 0.0 ? -Ar * std::expm1(order * std::log1p(-eps)) : Ar;
  m.m0 = diff / order;
  m.m1 = (A * Ar - B * Br - (order + 1.0) * h * Br) / (order * (order + 1.0));
  return m;
}

// (y^kappa - lo^kappa) without cancellation for y close to lo.
inline double basis_increment(double y, double lo, double kappa) {
  if (kappa == 1.0) return y - lo;
  if (lo == 0.0) return std::pow(y, kappa);
  return std::pow(lo, kappa) * std::expm1(kappa * std::log(y / lo));
}

struct GaussCell {
  static constexpr std::size_t kPoints = 10;
  std::array<double, kPoints> y{};
  std::array<double, kPoints> c{};  // weight * half width * y^gamma
  std::array<double, kPoints> d{};  // y^kappa - lo^kappa

  GaussCell(double lo, double hi, double gamma, double kappa) {
    using rule = boost::math::quadrature::gauss<double, kPoints>;
    const double mid = 0.5 * (lo + hi);
    const double r = 0.5 * (hi - lo);
    const auto& xs = rule::abscissa();
    const auto& ws = rule::weights();
    std::size_t p = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      for (int sgn : {-1, 1}) {
        y[p] = mid + sgn * r * xs[i];
        c[p] = ws[i] * r * (gamma == 0.0 ? 1.0 : std::pow(y[p], gamma));
        d[p] = basis_increment(y[p], lo, kappa);
        ++p;
      }
    }
  }

  CellMoments moments(double L, double order) const {
    CellMoments m;
    for (std::size_t p = 0; p < kPoints; ++p) {
      const double k = c[p] * std::exp((order - 1.0) * std::log(L - y[p]));
      m.m0 += k;
      m.m1 += k * d[p];
    }
    return m;
  }
};

// Moments of the kernel k(y) = (L-y)^{order-1} y^gamma over [lo, hi] with
// 0 <= lo < hi <= L: m0 = int k, m1 = int k (y^kappa - lo^kappa).
inline CellMoments cell_moments(double L, double lo, double hi, double order, double gamma,
                                double kappa = 1.0) {
  if (gamma == 0.0 && kappa == 1.0) return plain_moments(L, lo, hi, order);
  CellMoments m;
  const double h = hi - lo;
  if (lo == 0.0) {
    const double z = std::min(hi / L, 1.0);
    m.m0 = std::pow(L, order + gamma) * boost::math::beta(gamma + 1.0, order, z);
    m.m1 = std::pow(L, order + gamma + kappa) * boost::math::beta(gamma + kappa + 1.0, order, z);
    return m;
  }
  if (hi >= L) {
    const double z = lo / L;
    m.m0 = std::pow(L, order + gamma) * boost::math::betac(gamma + 1.0, order, z);
    if (kappa == 1.0) {
      m.m1 = h * m.m0 - std::pow(L, order + gamma + 1.0) * boost::math::betac(gamma + 1.0, order + 1.0, z);
    } else {
      m.m1 = std::pow(L, order + gamma + kappa) * boost::math::betac(gamma + kappa + 1.0, order, z) -
             std::pow(lo, kappa) * m.m0;
    }
    return m;
  }
  return GaussCell(lo, hi, gamma, kappa).moments(L, order);
}

// Value of the order-`order` integral of y^gamma H at X = x0, H(x0) = h0.
inline double origin_limit(double order, double gamma, double h0) {
  const double s = order + gamma;
  if (std::fabs(s) <= 64.0 * std::numeric_limits<double>::epsilon()) return std::tgamma(gamma + 1.0) * h0;
  if (s > 0.0) return 0.0;
  throw DomainError("fractional integral diverges at the left endpoint");
}

}  // namespace detail

/// Product-integration weights on nodes x_0 < ... < x_N measured from the
/// origin x_0 = phi(a). H is interpolated linearly in y^kappa on each cell
/// (kappa = 1: linear in phi). Row n integrates up to X = x_n:
///   Gamma(order) I(x_n) = sum_{j<n} left(n)[j] H_j^+ + right(n)[j] H_{j+1}^-
/// where H_j^+ / H_j^- are the right / left limits of H at node j.
class ProductQuadrature {
 public:
  ProductQuadrature(std::vector<double> x, double order, double gamma, double kappa = 1.0)
      : x_(std::move(x)), order_(order), gamma_(gamma), kappa_(kappa) {
    if (x_.size() < 2) throw ParameterError("product quadrature: need at least 2 nodes");
    if (!(order > 0.0)) throw ParameterError("product quadrature: order must be positive");
    if (!(gamma > -1.0)) throw ParameterError("product quadrature: endpoint exponent must exceed -1");
    if (!(kappa > 0.0)) throw ParameterError("product quadrature: basis exponent must be positive");
    const std::size_t n = x_.size();
    left_.resize(n * (n - 1) / 2);
    right_.resize(n * (n - 1) / 2);
    rgamma_order_ = 1.0 / std::tgamma(order_);
    if (gamma_ == 0.0 && kappa_ == 1.0) {
      for (std::size_t row = 1; row < n; ++row) {
        row_weights(x_, row, order_, gamma_, std::span<double>(left_.data() + offset(row), row),
                    std::span<double>(right_.data() + offset(row), row), kappa_);
      }
      return;
    }
    // Interior cells by Gauss rules whose nodes do not depend on the row.
    const double x0 = x_[0];
    std::vector<detail::GaussCell> cells;
    cells.reserve(n);
    for (std::size_t j = 0; j + 1 < n; ++j) cells.emplace_back(x_[j] - x0, x_[j + 1] - x0, gamma_, kappa_);
    for (std::size_t row = 1; row < n; ++row) {
      double* l = left_.data() + offset(row);
      double* r = right_.data() + offset(row);
      const double L = x_[row] - x0;
      for (std::size_t j = 0; j < row; ++j) {
        const double lo = x_[j] - x0;
        const double hi = j + 1 == row ? L : x_[j + 1] - x0;
        const auto m = (j == 0 || j + 1 == row) ? detail::cell_moments(L, lo, hi, order_, gamma_, kappa_)
                                                : cells[j].moments(L, order_);
        r[j] = m.m1 / detail::basis_increment(hi, lo, kappa_);
        l[j] = m.m0 - r[j];
      }
    }
  }

  std::size_t size() const { return x_.size(); }
  const std::vector<double>& nodes() const { return x_; }
  double order() const { return order_; }
  double endpoint_exponent() const { return gamma_; }
  double basis_exponent() const { return kappa_; }

  std::span<const double> left(std::size_t row) const { return {left_.data() + offset(row), row}; }
  std::span<const double> right(std::size_t row) const { return {right_.data() + offset(row), row}; }

  /// I^{order} of y^gamma H at node `row`, including the 1/Gamma(order) factor.
  double integrate(std::size_t row, std::span<const double> h_minus,
                   std::span<const double> h_plus) const {
    if (row == 0) return detail::origin_limit(order_, gamma_, h_plus[0]);
    const double* l = left_.data() + offset(row);
    const double* r = right_.data() + offset(row);
    double s = 0.0;
    for (std::size_t j = 0; j < row; ++j) s += l[j] * h_plus[j] + r[j] * h_minus[j + 1];
    return s * rgamma_order_;
  }

  double integrate(std::size_t row, std::span<const double> h) const { return integrate(row, h, h); }

  /// Weights for X = x[row] on arbitrary nodes x (x[0] is the origin).
  static void row_weights(std::span<const double> x, std::size_t row, double order, double gamma,
                          std::span<double> left, std::span<double> right, double kappa = 1.0) {
    const double x0 = x[0];
    const double L = x[row] - x0;
    for (std::size_t j = 0; j < row; ++j) {
      const double lo = x[j] - x0;
      const double hi = j + 1 == row ? L : x[j + 1] - x0;
      const auto m = detail::cell_moments(L, lo, hi, order, gamma, kappa);
      right[j] = m.m1 / detail::basis_increment(hi, lo, kappa);
      left[j] = m.m0 - right[j];
    }
  }

 private:
  static std::size_t offset(std::size_t row) { return row * (row - 1) / 2; }

  std::vector<double> x_;
  double order_;
  double gamma_;
  double kappa_;
  double rgamma_order_ = 1.0;
  std::vector<double> left_;
  std::vector<double> right_;
};

namespace detail {

// One row of product integration on nodes x (x[0] origin) with integrand y^gamma H.
inline double integrate_row(std::span<const double> x, std::span<const double> H, double order,
                            double gamma) {
  const std::size_t row = x.size() - 1;
  if (row == 0) return origin_limit(order, gamma, H[0]);
  std::vector<double> l(row), r(row);
  ProductQuadrature::row_weights(x, row, order, gamma, l, r);
  double s = 0.0;
  for (std::size_t j = 0; j < row; ++j) s += l[j] * H[j] + r[j] * H[j + 1];
  return s / std::tgamma(order);
}

// H_0 by linear extrapolation from nodes 1 and 2 in x.
inline double extrapolate_left(std::span<const double> x, std::span<const double> H) {
  if (H.size() < 3) return H[1];
  return H[1] + (H[1] - H[2]) * (x[1] - x[0]) / (x[2] - x[1]);
}

inline void check_order(double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) {
    std::ostringstream os;
    os << "fractional order must be positive, got " << rho;
    throw ParameterError(os.str());
  }
}

}  // namespace detail

/// I^{rho;phi}_{a+} f(t) on n_nodes nodes uniform in phi.
///
/// With endpoint_exponent = gamma != 0 the integrand is treated as
/// (phi(s)-phi(a))^gamma * H(s) with H = f / (phi(s)-phi(a))^gamma smooth;
/// f is then never evaluated at s = a. With gamma = 0, f(a) is used when
/// finite and extrapolated otherwise.
inline double frac_integral(const PhiFunction& phi, double rho, const std::function<double(double)>& f,
                            double a, double t, int n_nodes, double endpoint_exponent = 0.0) {
  detail::check_order(rho);
  if (!(a < t)) throw ParameterError("frac_integral: requires a < t");
  if (n_nodes < 2) throw ParameterError("frac_integral: requires at least 2 nodes");
  if (!(endpoint_exponent > -1.0)) throw ParameterError("frac_integral: endpoint exponent must exceed -1");
  const auto n = static_cast<std::size_t>(n_nodes);
  const auto grid = WeightedGridFunction::uniform_in_phi(phi, a, t, n);
  std::vector<double> x(n), H(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = phi.eval(grid[i]);
  const double gamma = endpoint_exponent;
  for (std::size_t i = 1; i < n; ++i) {
    const double v = f(grid[i]);
    H[i] = gamma == 0.0 ? v : v * std::pow(x[i] - x[0], -gamma);
  }
  H[0] = std::numeric_limits<double>::quiet_NaN();
  if (gamma == 0.0) {
    try {
      H[0] = f(a);
    } catch (const Error&) {
    }
  }
  if (!std::isfinite(H[0])) H[0] = n > 1 ? detail::extrapolate_left(x, H) : 0.0;
  return detail::integrate_row(x, H, rho, gamma);
}

/// I^{rho;phi}_{a+} u(t) for a grid function starting at a. The weighted
/// values are interpolated linearly in phi and integrated exactly against
/// the kernel times (phi(s)-phi(a))^{sigma-1}.
inline double frac_integral(const WeightedGridFunction& u, double rho, double t) {
  detail::check_order(rho);
  u.validate();
  if (u.grid.front() != u.a) throw ParameterError("frac_integral: grid function must start at a");
  if (!(t >= u.a && t <= u.grid.back())) throw ParameterError("frac_integral: t outside the grid span");
  const double gamma = u.sigma - 1.0;
  const auto xs = u.phi_nodes();
  const double X = u.phi.eval(t);
  std::vector<double> x, H;
  for (std::size_t i = 0; i < xs.size() && xs[i] < X; ++i) {
    x.push_back(xs[i]);
    H.push_back(u.weighted_values[i]);
  }
  const auto it = std::lower_bound(xs.begin(), xs.end(), X);
  const auto k = static_cast<std::size_t>(it - xs.begin());
  double wX;
  if (k < xs.size() && xs[k] == X) {
    wX = u.weighted_values[k];
  } else {
    const double th = (X - xs[k - 1]) / (xs[k] - xs[k - 1]);
    wX = (1.0 - th) * u.weighted_values[k - 1] + th * u.weighted_values[k];
  }
  x.push_back(X);
  H.push_back(wX);
  if (x.size() == 1) return detail::origin_limit(rho, gamma, wX);
  return detail::integrate_row(x, H, rho, gamma);
}

/// phi-Hilfer derivative of order rho and type nu at the requested node
/// indices of u (which must start at a and be continuous).
///
/// G = I^{(1-nu)(1-rho)} u is differentiated in s = (phi - phi(a))^rho,
/// in which G is smooth near a; dG/dphi = rho y^{rho-1} dG/ds. The outer
/// integral I^{nu(1-rho)} then treats y^{rho-1} analytically.
inline std::vector<double> hilfer_derivative_nodes(const PhiFunction& phi, double rho, double nu,
                                                   const WeightedGridFunction& u,
                                                   std::span<const std::size_t> rows) {
  if (!(rho > 0.0 && rho < 1.0)) throw ParameterError("hilfer_derivative: rho must lie in (0, 1)");
  if (!(nu >= 0.0 && nu <= 1.0)) throw ParameterError("hilfer_derivative: nu must lie in [0, 1]");
  u.validate();
  if (u.size() < 32) throw ParameterError("hilfer_derivative: insufficient grid (need at least 32 nodes)");
  if (u.grid.front() != u.a) throw ParameterError("hilfer_derivative: grid must start at a");
  if (rows.empty()) return {};
  const std::size_t last_row = *std::max_element(rows.begin(), rows.end());
  if (last_row >= u.size()) throw ParameterError("hilfer_derivative: node index out of range");

  const std::size_t n = std::min(u.size(), last_row + 2);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = phi.eval(u.grid[i]);
  const double x0 = x[0];
  const double gamma_u = u.sigma - 1.0;
  const double inner = (1.0 - nu) * (1.0 - rho);
  const double outer = nu * (1.0 - rho);

  std::vector<double> G(n);
  std::span<const double> w(u.weighted_values.data(), n);
  if (inner == 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      G[i] = gamma_u == 0.0 ? w[i]
                            : (i == 0 ? std::numeric_limits<double>::quiet_NaN()
                                      : w[i] * std::pow(x[i] - x0, gamma_u));
    }
  } else {
    const ProductQuadrature q(std::vector<double>(x.begin(), x.end()), inner, gamma_u);
    for (std::size_t i = 0; i < n; ++i) G[i] = q.integrate(i, w);
  }

  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = std::pow(x[i] - x0, rho);
  // K = rho dG/ds by 3-point differences on the non-uniform s grid.
  auto three_point = [&](std::size_t i0, double at) {
    const double s0 = s[i0], s1 = s[i0 + 1], s2 = s[i0 + 2];
    const double d0 = ((at - s1) + (at - s2)) / ((s0 - s1) * (s0 - s2));
    const double d1 = ((at - s0) + (at - s2)) / ((s1 - s0) * (s1 - s2));
    const double d2 = ((at - s0) + (at - s1)) / ((s2 - s0) * (s2 - s1));
    return d0 * G[i0] + d1 * G[i0 + 1] + d2 * G[i0 + 2];
  };
  const std::size_t nk = last_row + 1;
  std::vector<double> K(nk);
  for (std::size_t i = 0; i < nk; ++i) {
    std::size_t i0;
    if (i == 0) {
      i0 = 0;
    } else if (i + 1 >= n) {
      i0 = n - 3;
    } else {
      i0 = i - 1;
    }
    if (inner == 0.0 && gamma_u != 0.0 && i0 == 0) i0 = 1;  // G unbounded at a
    K[i] = rho * three_point(i0, s[i]);
  }

  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t row : rows) {
    if (outer == 0.0) {
      out.push_back(row == 0 ? std::numeric_limits<double>::infinity()
                             : K[row] * std::pow(x[row] - x0, rho - 1.0));
      continue;
    }
    std::span<const double> xr(x.data(), row + 1);
    std::span<const double> Kr(K.data(), row + 1);
    out.push_back(detail::integrate_row(xr, Kr, outer, rho - 1.0));
  }
  return out;
}

/// phi-Hilfer derivative at an interior point t, interpolated linearly in
/// phi between neighbouring nodes.
inline double hilfer_derivative(const PhiFunction& phi, double rho, double nu,
                                const WeightedGridFunction& u, double t) {
  u.validate();
  if (!(t > u.grid.front() && t < u.grid.back())) {
    throw ParameterError("hilfer_derivative: t must lie strictly inside the grid span");
  }
  const auto it = std::lower_bound(u.grid.begin(), u.grid.end(), t);
  const auto k = static_cast<std::size_t>(it - u.grid.begin());
  if (u.grid[k] == t) {
    const std::size_t row[] = {k};
    return hilfer_derivative_nodes(phi, rho, nu, u, row)[0];
  }
  const std::size_t rows[] = {k - 1, k};
  const auto d = hilfer_derivative_nodes(phi, rho, nu, u, rows);
  if (k - 1 == 0) return d[1];
  const double x = phi.eval(t);
  const double xl = phi.eval(u.grid[k - 1]);
  const double xr = phi.eval(u.grid[k]);
  const double th = (x - xl) / (xr - xl);
  return (1.0 - th) * d[0] + th * d[1];
}

}  // namespace phihilfer
