#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "plshoot/variational.hpp"

using namespace plshoot;

namespace {

ProblemModel canonical() {
  return ProblemModel(Parameters(2.0, 3.0), Weight::matukuma(2.0), Nonlinearity::power_diff(3.0, 0.5));
}

// f = u - 1 with K = 1, p = 2, n = 3: u = 1 + (alpha - 1) sin r / r, so du/dalpha = sin r / r
ProblemModel linear() {
  return ProblemModel(Parameters(2.0, 3.0), Weight::constant(),
                      Nonlinearity::closure(
                          "shifted", [](double u) { return u - 1.0; }, [](double) { return 1.0; }, 1.0,
                          [](double u) { return 0.5 * u * u - u; }));
}

IntegratorControls tight() {
  IntegratorControls c;
  c.rel_tol = 1e-12;
  c.abs_tol = 1e-14;
  return c;
}

}  // namespace

TEST_CASE("linear source has the closed-form derivative") {
  ProblemModel m = linear();
  Trajectory t = integrate_ivp(m, 3.0, tight());
  VariationalState V = solve_variational(m, t);
  REQUIRE(V.nodes().size() > 10);
  // r0 solves sin r / r = 0
  CHECK(V.r0() == doctest::Approx(M_PI).epsilon(1e-10));
  for (const auto& nd : V.nodes()) {
    double sinc = nd.r == 0.0 ? 1.0 : std::sin(nd.r) / nd.r;
    double dsinc = nd.r == 0.0 ? 0.0 : (nd.r * std::cos(nd.r) - std::sin(nd.r)) / (nd.r * nd.r);
    CAPTURE(nd.r);
    CHECK(std::abs(nd.phi - sinc) < 1e-9);
    CHECK(std::abs(nd.dphi - dsinc) < 1e-8);
  }
}

TEST_CASE("flux derivative equals (p-1) r^{n-1} |u'|^{p-2} phi'") {
  for (double p : {1.5, 2.0, 3.0}) {
    double n = p < 3.0 ? 3.0 : 4.0;
    ProblemModel m(Parameters(p, n), Weight::matukuma(p < 2.0 ? 1.0 : 2.0), Nonlinearity::power_diff(3.0, 0.5));
    double alpha = p < 2.0 ? 2.5 : 5.0;
    Trajectory t = integrate_ivp(m, alpha, tight());
    VariationalState V = solve_variational(m, t);
    const auto& base = V.base();
    double worst = 0.0, scale = 0.0;
    for (const auto& nd : V.nodes()) {
      if (nd.r < 1e-2 * V.r0() || nd.r > 0.9 * V.r0()) continue;
      double du = base.du_at(nd.r);
      double rhs = (p - 1.0) * std::pow(nd.r, n - 1.0) * std::pow(std::abs(du), p - 2.0) * nd.dphi;
      worst = std::max(worst, std::abs(nd.flux - rhs));
      scale = std::max(scale, std::abs(nd.flux));
    }
    CAPTURE(p);
    CHECK(worst < 1e-7 * scale);
  }
}

TEST_CASE("theta is the flux derivative over r^{n-1} K^{1/p'}") {
  ProblemModel m = canonical();
  Trajectory t = integrate_ivp(m, 5.0);
  VariationalState V = solve_variational(m, t);
  double pc = m.params.p_conj();
  for (const auto& nd : V.nodes()) {
    if (nd.r == 0.0) continue;
    double q = std::pow(nd.r, m.params.n - 1.0) * std::pow(m.weight.K(nd.r), 1.0 / pc);
    CHECK(nd.theta == doctest::Approx(nd.flux / q).epsilon(1e-12));
  }
}

TEST_CASE("central differences in alpha agree with the variational solution") {
  ProblemModel m = canonical();
  for (double alpha : {3.0, 5.0, 9.0}) {
    auto F = fd_check(m, alpha, 1e-6 * alpha, tight());
    CAPTURE(alpha);
    CHECK(F.phi_rel_err < 1e-4);
    CHECK(F.dr0_rel_err < 1e-3);
    CHECK(F.points > 20);
  }
}

TEST_CASE("alpha derivatives") {
  ProblemModel m = canonical();
  AlphaDerivatives D = alpha_derivatives(m, 5.0, tight());
  CHECK(D.dr0_dalpha == doctest::Approx(-D.phi_r0 / D.du_r0).epsilon(1e-14));
  CHECK(D.dr0_dalpha < 0.0);
  CHECK(D.identity_lhs == doctest::Approx(D.identity_rhs).epsilon(1e-4));
  // r0 and r0 u'(r0) through finite differences of two shots
  double h = 1e-5;
  Trajectory a = integrate_ivp(m, 5.0 + h, tight()), b = integrate_ivp(m, 5.0 - h, tight());
  double fd = (*a.r0() - *b.r0()) / (2 * h);
  CHECK(D.dr0_dalpha == doctest::Approx(fd).epsilon(1e-6));
  double fd2 = (*a.r0() * *a.du_r0() - *b.r0() * *b.du_r0()) / (2 * h);
  CHECK(D.d_r0du_dalpha == doctest::Approx(fd2).epsilon(1e-6));
}

TEST_CASE("Kwong quotient decreases below r0") {
  ProblemModel m = canonical();
  for (double alpha : {3.0, 4.0, 7.0}) {
    auto K = kwong_check(m, integrate_ivp(m, alpha));
    CAPTURE(alpha);
    CHECK(K.decreasing);
  }
}

TEST_CASE("G profile starts at -(n-p)") {
  ProblemModel m = canonical();
  Trajectory t = integrate_ivp(m, 4.2888);
  double G = eval_G(m, t, 1.0 + 1e-7);
  CHECK(G == doctest::Approx(-(m.params.n - m.params.p)).epsilon(1e-3));
  CHECK_THROWS(eval_G(m, t, 0.5));
}
