#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "phihilfer/bounds.hpp"

using namespace phihilfer;

namespace {

const double kE = std::exp(1.0);

ImpulsiveProblem example_problem() {
  ImpulsiveProblem p;
  p.order = FractionalOrder(0.7, 0.5);
  p.u_a = 1.0;
  p.set_rhs(Expression::parse("(phi(t)-phi(0))^0.15/(1+abs(u)) + 3*sin(phi(t)-phi(0))^2", {"t", "u"}));
  p.add_impulse(0.5, Expression::parse("0.5^0.15*abs(u)/(1+abs(u))", {"u"}));
  return p;
}

}  // namespace

TEST(Gronwall, EmptyProductAndZeroKernel) {
  GronwallInputs in;
  in.rho = 0.6;
  in.V = [](double t) { return 1.0 + t; };
  in.g = [](double) { return 0.0; };
  EXPECT_DOUBLE_EQ(gronwall_bound(in, 0.7), 1.7);
}

TEST(Gronwall, ConstantKernel) {
  GronwallInputs in;
  in.rho = 0.6;
  in.V = [](double) { return 2.0; };
  in.g = [](double) { return 0.5; };
  const double t = 0.8;
  EXPECT_DOUBLE_EQ(gronwall_bound(in, t), 2.0 * mittag_leffler(0.6, 0.5 * std::tgamma(0.6) * std::pow(t, 0.6)));
}

TEST(Gronwall, ExponentialCaseWithOneImpulse) {
  GronwallInputs in;
  in.rho = 1.0;
  in.V = [](double) { return 1.0; };
  in.g = [](double) { return 1.0; };
  in.betas = {1.0};
  in.impulse_times = {0.5};
  EXPECT_NEAR(gronwall_bound(in, 1.0), (1.0 + std::exp(0.5)) * kE, 1e-12);
  // before the impulse the product is empty
  EXPECT_NEAR(gronwall_bound(in, 0.4), std::exp(0.4), 1e-12);
}

TEST(Gronwall, RejectsBadInputs) {
  GronwallInputs in;
  in.V = [](double) { return 1.0; };
  in.g = [](double) { return 1.0; };
  EXPECT_THROW(gronwall_bound(in, 0.0), ParameterError);
  in.betas = {0.0};
  in.impulse_times = {0.5};
  EXPECT_THROW(gronwall_bound(in, 1.0), ParameterError);
  in.betas = {1.0, 2.0};
  EXPECT_THROW(gronwall_bound(in, 1.0), ParameterError);
}

TEST(AprioriFactor, Examples) {
  const auto id = PhiFunction::identity();
  EXPECT_DOUBLE_EQ(apriori_factor(0, 0.6, 0.8, id, 0.0, 2.0), mittag_leffler(0.6, std::pow(2.0, 0.8)));
  EXPECT_NEAR(apriori_factor(1, 1.0, 1.0, id, 0.0, 1.0), (1.0 + kE) * kE, 1e-12);
  const double a1 = apriori_factor(1, 0.7, 0.85, id, 0.0, 1.0);
  const double a0 = apriori_factor(0, 0.7, 0.85, id, 0.0, 1.0);
  const double bracket = a1 / a0;
  EXPECT_NEAR(apriori_factor(2, 0.7, 0.85, id, 0.0, 1.0), bracket * a1, 1e-12 * a1 * bracket);
  EXPECT_GE(a0, 1.0);
  EXPECT_THROW(apriori_factor(-1, 0.7, 0.85, id, 0.0, 1.0), ParameterError);
}

TEST(AprioriSolutionBound, Examples) {
  ImpulsiveProblem p;
  p.order = FractionalOrder(0.5, 0.5);
  p.u_a = 0.0;
  p.rhs = [](double, double) { return 0.0; };
  EXPECT_EQ(apriori_solution_bound(p, 0.0, 0.0), 0.0);

  p.u_a = -1.5;
  const double gs = std::tgamma(p.order.sigma());
  const double bound = apriori_solution_bound(p, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(bound, apriori_factor(0, 0.5, p.order.sigma(), p.phi, 0.0, 1.0) * 1.5 / gs);
  const auto s = solve_picard(p, 32, 1e-12, 10);
  EXPECT_LE(weighted_norm(s.as_grid_function()), bound);

  const auto e = example_problem();
  const auto sup = estimate_sup_constants(e, 257);
  const double eb = apriori_solution_bound(e, sup.M_star, sup.N_star);
  EXPECT_TRUE(std::isfinite(eb));
  EXPECT_GT(eb, 0.0);
  EXPECT_LE(weighted_norm(solve_picard(e, 128, 1e-12, 500).as_grid_function()), eb);
}

TEST(SupConstants, Examples) {
  ImpulsiveProblem p;
  p.order = FractionalOrder(0.5, 1.0);
  p.rhs = [](double, double) { return 3.0; };
  p.add_impulse(0.5, [](double u) { return 0.7 * u / (1.0 + std::fabs(u)); });
  const auto c = estimate_sup_constants(p, 50);
  EXPECT_EQ(c.M_star, 3.0);
  EXPECT_EQ(c.N_star, 0.0);
  EXPECT_EQ(c.lipschitz_estimate, 0.0);
  EXPECT_FALSE(c.lipschitz_advisory());

  p.rhs = [](double, double u) { return 2.0 * u; };
  EXPECT_NEAR(estimate_sup_constants(p, 50).lipschitz_estimate, 2.0, 1e-9);
  EXPECT_TRUE(estimate_sup_constants(p, 50).lipschitz_advisory());
  EXPECT_THROW(estimate_sup_constants(p, 1), ParameterError);
}

TEST(SupConstants, ExampleProblemAgainstDenseSampling) {
  const auto p = example_problem();
  const auto c = estimate_sup_constants(p, 201);
  double dense = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double t = i / 200.0;
    dense = std::max(dense, std::pow(t, 0.15) + 3.0 * std::sin(t) * std::sin(t));
  }
  EXPECT_NEAR(c.M_star, dense, 1e-12);
  EXPECT_EQ(c.N_star, 0.0);
  EXPECT_LE(c.lipschitz_estimate, 1.0);
  EXPECT_GT(c.lipschitz_estimate, 0.1);
}

TEST(DependenceBounds, InitialCondition) {
  const auto id = PhiFunction::identity();
  EXPECT_EQ(ic_dependence_bound(0.0, 2, 0.6, 0.8, id, 0.0, 1.0), 0.0);
  EXPECT_NEAR(ic_dependence_bound(1.0, 0, 1.0, 1.0, id, 0.0, 1.0), kE, 1e-12);
  const double b = ic_dependence_bound(0.3, 1, 0.6, 0.8, id, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(ic_dependence_bound(0.6, 1, 0.6, 0.8, id, 0.0, 1.0), 2.0 * b);
  EXPECT_THROW(ic_dependence_bound(-1.0, 1, 0.6, 0.8, id, 0.0, 1.0), ParameterError);
}

TEST(DependenceBounds, Data) {
  const auto id = PhiFunction::identity();
  EXPECT_EQ(data_dependence_bound(0.0, 0.0, 0.0, 1, 0.6, 0.8, id, 0.0, 1.0), 0.0);
  for (double da : {0.0, 0.1, 1.7}) {
    EXPECT_EQ(data_dependence_bound(da, 0.0, 0.0, 2, 0.6, 0.8, id, 0.0, 1.5),
              ic_dependence_bound(da, 2, 0.6, 0.8, id, 0.0, 1.5));
  }
  EXPECT_NEAR(data_dependence_bound(0.0, 1.0, 0.0, 0, 1.0, 1.0, id, 0.0, 1.0), kE, 1e-12);
}

TEST(DependenceBounds, Order) {
  const auto id = PhiFunction::identity();
  // sigma = nu = 1: the first two terms vanish
  const FractionalOrder caputo(0.8, 1.0);
  EXPECT_NEAR(order_dependence_envelope(1.0, 0.2, 1.0, 1.0, 0.0, 1.0, caputo, id, 0.0),
              1.0 / std::tgamma(1.8) - 1.0 / std::tgamma(1.6), 1e-14);
  const double A = apriori_factor(0, 0.8, 1.0, id, 0.0, 1.0);
  EXPECT_NEAR(order_dependence_bound(1.0, 0.2, 1.0, 1.0, 0.0, 1.0, caputo, id, 0.0, 1.0, 0),
              (1.0 / std::tgamma(1.8) - 1.0 / std::tgamma(1.6)) * A, 1e-14);

  const FractionalOrder o(0.7, 0.5);
  const int m = 1;
  const double gs = std::tgamma(o.sigma());
  const double Am = apriori_factor(m, 0.7, o.sigma(), id, 0.0, 1.0);
  EXPECT_LT(std::fabs(order_dependence_bound(0.6, 1e-9, 1.0, 1.0, 0.5, 2.0, o, id, 0.0, 1.0, m)), 1e-7);
  EXPECT_NEAR(order_dependence_bound(0.6, 1e-9, 1.0, 1.4, 0.0, 0.0, o, id, 0.0, 1.0, m), 0.4 / gs * Am, 1e-7);
  EXPECT_THROW(order_dependence_bound(0.6, 0.7, 1.0, 1.0, 0.0, 0.0, o, id, 0.0, 1.0, m), ParameterError);
  EXPECT_THROW(order_dependence_bound(0.0, 0.1, 1.0, 1.0, 0.0, 0.0, o, id, 0.0, 1.0, m), ParameterError);
}

TEST(UlamConstants, Examples) {
  const auto id = PhiFunction::identity();
  EXPECT_NEAR(uh_constant(0, 1.0, 1.0, id, 0.0, 1.0), kE, 1e-12);
  EXPECT_NEAR(uh_constant(1, 1.0, 1.0, id, 0.0, 1.0), (1.0 + kE) * kE * 2.0, 1e-9);
  EXPECT_LT(uh_constant(0, 0.7, 0.85, id, 0.0, 1.0), uh_constant(1, 0.7, 0.85, id, 0.0, 1.0));
  EXPECT_LT(uh_constant(1, 0.7, 0.85, id, 0.0, 1.0), uh_constant(2, 0.7, 0.85, id, 0.0, 1.0));

  EXPECT_DOUBLE_EQ(uhr_constant(0, 0.6, 1.0, 1.0, id, 0.0, 1.0), apriori_factor(0, 0.6, 1.0, id, 0.0, 1.0));
  EXPECT_DOUBLE_EQ(uhr_constant(0, 0.6, 0.9, 2.0, id, 0.0, 1.3), 2.0 * uhr_constant(0, 0.6, 0.9, 1.0, id, 0.0, 1.3));
  EXPECT_NEAR(uhr_constant(1, 1.0, 1.0, 0.5, id, 0.0, 1.0), 1.5 * (1.0 + kE) * kE, 1e-12);
  EXPECT_THROW(uhr_constant(1, 0.6, 0.9, 0.0, id, 0.0, 1.0), ParameterError);
}

TEST(UlamConstants, ExampleClosedForm) {
  const auto id = PhiFunction::identity();
  const double rho = 0.7, sigma = 0.85;
  const double gs = std::tgamma(sigma);
  const double E = mittag_leffler(rho, 1.0);
  const double expected = (1.0 / gs + 1.0 / std::tgamma(rho + 1.0)) * (1.0 + E / gs) * E;
  EXPECT_NEAR(uh_constant(1, rho, sigma, id, 0.0, 1.0), expected, 1e-12 * expected);
}

TEST(FitLambdaTheta, ConstantTheta) {
  const auto theta = Expression::parse("1", {"t"});
  const double lambda = fit_lambda_theta(theta, 0.5, PhiFunction::identity(), 0.0, 1.0, 101);
  EXPECT_NEAR(lambda, 1.05 / std::tgamma(1.5), 1e-10);
}

TEST(FitLambdaTheta, MittagLefflerEigenfunction) {
  // I^rho E_rho(y^rho) = E_rho(y^rho) - 1; for rho = 1/2, E_rho(y^rho) = e^y (1 + erf(sqrt y))
  const auto theta = Expression::parse("exp(t)*(1+erf(sqrt(t)))", {"t"});
  const double lambda = fit_lambda_theta(theta, 0.5, PhiFunction::identity(), 0.0, 10.0, 801);
  EXPECT_GT(lambda / 1.05, 0.99);
  EXPECT_LT(lambda / 1.05, 1.001);
}

TEST(FitLambdaTheta, RejectsBadTheta) {
  const auto id = PhiFunction::identity();
  EXPECT_THROW(fit_lambda_theta(Expression::parse("2-t", {"t"}), 0.5, id, 0.0, 1.0, 50), HypothesisError);
  EXPECT_THROW(fit_lambda_theta(Expression::parse("t-0.5", {"t"}), 0.5, id, 0.0, 1.0, 50), HypothesisError);
}

TEST(BoundProperties, MonotoneInMagnitudes) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto id = PhiFunction::identity();
  for (int trial = 0; trial < 50; ++trial) {
    const double rho = 0.1 + 0.85 * U(rng);
    const double nu = U(rng);
    const double sigma = FractionalOrder(rho, nu).sigma();
    const int m = static_cast<int>(4 * U(rng));
    const double T = 0.2 + 2.0 * U(rng);
    const double du = U(rng), ef = U(rng), eJ = U(rng), lam = 0.1 + U(rng);
    const double bump = 0.1 + U(rng);
    const double ic = ic_dependence_bound(du, m, rho, sigma, id, 0.0, T);
    EXPECT_LE(ic, ic_dependence_bound(du + bump, m, rho, sigma, id, 0.0, T));
    EXPECT_LE(ic, ic_dependence_bound(du, m + 1, rho, sigma, id, 0.0, T));
    EXPECT_LE(ic, ic_dependence_bound(du, m, rho, sigma, id, 0.0, T + bump));
    const double dd = data_dependence_bound(du, ef, eJ, m, rho, sigma, id, 0.0, T);
    EXPECT_LE(dd, data_dependence_bound(du + bump, ef, eJ, m, rho, sigma, id, 0.0, T));
    EXPECT_LE(dd, data_dependence_bound(du, ef + bump, eJ, m, rho, sigma, id, 0.0, T));
    EXPECT_LE(dd, data_dependence_bound(du, ef, eJ + bump, m, rho, sigma, id, 0.0, T));
    EXPECT_LE(dd, data_dependence_bound(du, ef, eJ, m + 1, rho, sigma, id, 0.0, T));
    EXPECT_LE(dd, data_dependence_bound(du, ef, eJ, m, rho, sigma, id, 0.0, T + bump));
    const double uh = uh_constant(m, rho, sigma, id, 0.0, T);
    EXPECT_LE(uh, uh_constant(m + 1, rho, sigma, id, 0.0, T));
    EXPECT_LE(uh, uh_constant(m, rho, sigma, id, 0.0, T + bump));
    const double uhr = uhr_constant(m, rho, sigma, lam, id, 0.0, T);
    EXPECT_LE(uhr, uhr_constant(m, rho, sigma, lam + bump, id, 0.0, T));
    EXPECT_LE(uhr, uhr_constant(m + 1, rho, sigma, lam, id, 0.0, T));
    EXPECT_LE(uhr, uhr_constant(m, rho, sigma, lam, id, 0.0, T + bump));
    EXPECT_LE(apriori_factor(m, rho, sigma, id, 0.0, T), apriori_factor(m + 1, rho, sigma, id, 0.0, T));
  }
}

TEST(BoundProperties, SolvedInstancesRespectInitialConditionBound) {
  auto p = example_problem();
  const auto su = solve_picard(p, 128, 1e-12, 500);
  for (double dv : {0.1, 1.0, -0.7}) {
    auto q = p;
    q.u_a = p.u_a + dv;
    const auto sv = solve_picard(q, 128, 1e-12, 500);
    double diff = 0.0;
    for (std::size_t j = 0; j < su.w.size(); ++j) diff = std::max(diff, std::fabs(su.w[j] - sv.w[j]));
    EXPECT_LE(diff, ic_dependence_bound(std::fabs(dv), 1, 0.7, p.order.sigma(), p.phi, 0.0, 1.0));
  }
}

TEST(StabilityConstants, Assembled) {
  const auto p = example_problem();
  const auto c = stability_constants(p, Expression::parse("1", {"t"}), 1.0, 0.01);
  EXPECT_GE(c.A_factor, 1.0);
  EXPECT_DOUBLE_EQ(c.C_uh, uh_constant(1, 0.7, p.order.sigma(), p.phi, 0.0, 1.0));
  EXPECT_GT(c.lambda_theta, 0.0);
  EXPECT_DOUBLE_EQ(c.C_uhr, uhr_constant(1, 0.7, p.order.sigma(), c.lambda_theta, p.phi, 0.0, 1.0));
  EXPECT_NEAR(c.zeta, std::pow(0.5, 0.15) * 10.0 / 11.0, 1e-12);
  EXPECT_EQ(c.chi, 1.0);
  EXPECT_EQ(c.epsilon, 0.01);
}
