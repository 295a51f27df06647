#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "plshoot/dopri5.hpp"
#include "plshoot/error.hpp"
#include "plshoot/shoot.hpp"

using namespace plshoot;

namespace {

ProblemModel canonical() {
  return ProblemModel(Parameters(2.0, 3.0), Weight::matukuma(2.0), Nonlinearity::power_diff(3.0, 0.5));
}

// f = 1 everywhere: u = alpha - (p-1)/p (r^n / n)^{1/(p-1)} r^{-(n-p)/(p-1)} ... in closed form
//   u(r) = alpha - (p-1)/p * n^{-1/(p-1)} * r^{p/(p-1)} for K = 1
double flat_u(double alpha, double p, double n, double r) {
  return alpha - (p - 1.0) / p * std::pow(n, -1.0 / (p - 1.0)) * std::pow(r, p / (p - 1.0));
}

ProblemModel flat(double p, double n) {
  return ProblemModel(Parameters(p, n), Weight::constant(),
                      Nonlinearity::closure(
                          "one", [](double) { return 1.0; }, [](double) { return 0.0; }, 0.5,
                          [](double u) { return u; }));
}

// max dense-output error at step midpoints for y' = y on [0, 1] with steps of h
double dense_error(double h) {
  ode::StepControl ctl;
  ctl.rel_tol = 1.0;
  ctl.abs_tol = 1.0;
  ctl.h_init = h;
  ctl.h_max = h;
  double worst = 0.0;
  ode::dopri5<1>([](double, const ode::State<1>& y) { return y; }, 0.0, ode::State<1>{1.0}, 1.0, ctl,
                 [&](const ode::DenseSegment<1>& seg, const ode::State<1>&) {
                   for (double th : {0.25, 0.5, 0.75}) {
                     double x = seg.x0 + th * seg.h;
                     worst = std::max(worst, std::abs(seg.component(0, x) - std::exp(x)));
                   }
                   return false;
                 });
  return worst;
}

}  // namespace

TEST_CASE("dense output converges at fourth order or better") {
  double e1 = dense_error(0.1), e2 = dense_error(0.05), e3 = dense_error(0.025);
  double o1 = std::log2(e1 / e2), o2 = std::log2(e2 / e3);
  CAPTURE(e1);
  CAPTURE(e2);
  CAPTURE(e3);
  CHECK(o1 > 3.8);
  CHECK(o2 > 3.8);
}

TEST_CASE("adaptive steps meet the tolerance on a smooth problem") {
  ode::StepControl ctl;
  ctl.rel_tol = 1e-10;
  ctl.abs_tol = 1e-12;
  ode::State<2> end{};
  auto res = ode::dopri5<2>(
      [](double, const ode::State<2>& y) { return ode::State<2>{y[1], -y[0]}; }, 0.0, ode::State<2>{0.0, 1.0}, 10.0,
      ctl, [&](const ode::DenseSegment<2>&, const ode::State<2>& y) {
        end = y;
        return false;
      });
  CHECK(res.outcome == ode::Outcome::reached_end);
  CHECK(std::abs(end[0] - std::sin(10.0)) < 1e-8);
  CHECK(std::abs(end[1] - std::cos(10.0)) < 1e-8);
}

TEST_CASE("startup with K = 1 matches the frozen closed form") {
  for (double p : {1.5, 2.0, 3.0}) {
    double n = p + 1.5;
    ProblemModel m = flat(p, n);
    StartupResult s = origin_startup(m, 2.0, 1e-3);
    CAPTURE(p);
    CHECK(s.u_frozen == doctest::Approx(flat_u(2.0, p, n, s.r1)).epsilon(1e-13));
    CHECK(s.u == doctest::Approx(flat_u(2.0, p, n, s.r1)).epsilon(1e-13));
    CHECK(s.m == doctest::Approx(-std::pow(s.r1, n) / n).epsilon(1e-12));
  }
}

TEST_CASE("constant source: whole shot and zero crossing are exact") {
  for (double p : {1.5, 2.0, 3.0}) {
    double n = p + 1.5;
    ProblemModel m = flat(p, n);
    double alpha = 2.0;
    Trajectory t = integrate_ivp(m, alpha);
    CAPTURE(p);
    REQUIRE(t.stop_event() == StopEvent::u_hit_zero);
    double R = std::pow(alpha * p / (p - 1.0) * std::pow(n, 1.0 / (p - 1.0)), (p - 1.0) / p);
    CHECK(t.R() == doctest::Approx(R).epsilon(1e-9));
    for (const auto& nd : t.nodes()) CHECK(std::abs(nd.u - flat_u(alpha, p, n, nd.r)) < 100 * t.controls().rel_tol * alpha);
    CHECK(std::abs(t.u_at(0.5 * R) - flat_u(alpha, p, n, 0.5 * R)) < 100 * t.controls().rel_tol * alpha);
  }
}

TEST_CASE("flux satisfies the integral form of the equation") {
  ProblemModel m = canonical();
  for (double alpha : {2.0, 4.0, 8.0}) {
    Trajectory t = integrate_ivp(m, alpha);
    double n = m.params.n;
    auto src = [&](double s) { return std::pow(s, n - 1.0) * m.weight.K(s) * m.nonlinearity.f_odd(t.u_at(s)); };
    double acc = 0.0, prev = 0.0, worst = 0.0;
    for (const auto& nd : t.nodes()) {
      if (nd.r == 0.0) continue;
      acc += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(src, prev, nd.r, 10, 1e-13);
      prev = nd.r;
      worst = std::max(worst, std::abs(nd.m + acc) / (1.0 + std::abs(acc)));
    }
    CAPTURE(alpha);
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("energy is non-increasing") {
  ProblemModel m = canonical();
  for (double alpha : {1.5, 3.0, 4.2888, 6.0}) {
    Trajectory t = integrate_ivp(m, alpha);
    double E0 = energy_at_node(m, t.nodes().front()).E;
    double prev = E0;
    for (const auto& nd : t.nodes()) {
      double E = energy_at_node(m, nd).E;
      CHECK(E <= prev + 1e-8 * (1.0 + std::abs(E0)));
      prev = E;
    }
    CHECK(E0 == doctest::Approx(m.nonlinearity.F(alpha)));
  }
}

TEST_CASE("stop events") {
  ProblemModel m = canonical();
  Trajectory low = integrate_ivp(m, 2.0);
  CHECK(low.stop_event() == StopEvent::du_hit_zero);
  CHECK(low.terminal().u > 0.0);
  Trajectory high = integrate_ivp(m, 8.0);
  CHECK(high.stop_event() == StopEvent::u_hit_zero);
  CHECK(std::abs(high.terminal().u) < 1e-12);
  REQUIRE(high.r0());
  CHECK(high.u_at(*high.r0()) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK_THROWS_AS(integrate_ivp(m, 0.5), DomainError);
}

TEST_CASE("inverse profile") {
  ProblemModel m = canonical();
  Trajectory t = integrate_ivp(m, 6.0);
  InverseProfile inv(t);
  for (double s : {0.1, 0.5, 1.0, 3.0, 5.9}) CHECK(t.u_at(inv.t(s)) == doctest::Approx(s).epsilon(1e-10));
}

TEST_CASE("controls validation") {
  IntegratorControls c;
  c.rel_tol = -1.0;
  CHECK_THROWS(c.validate());
  IntegratorControls d;
  IntegratorControls e = d.tightened(10.0);
  CHECK(e.rel_tol == doctest::Approx(d.rel_tol / 10.0));
}
