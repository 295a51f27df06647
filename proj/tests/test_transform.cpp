#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "plshoot/config.hpp"
#include "plshoot/error.hpp"
#include "plshoot/transform.hpp"

using namespace plshoot;

namespace {

Nonlinearity nl() { return Nonlinearity::power_diff(3.0, 0.5); }

// log K~ against log t by central differences through the maps
double numeric_g(const TransformedModel& T, double r) {
  double h = 1e-4;
  double t = T.forward(r);
  double tp = t * std::exp(h), tm = t * std::exp(-h);
  double Kp = T.K_at_r(T.inverse(tp)).K, Km = T.K_at_r(T.inverse(tm)).K;
  return T.p() + (std::log(Kp) - std::log(Km)) / (2.0 * h);
}

}  // namespace

TEST_CASE("forward and inverse maps round trip") {
  auto T = transform_ab_to_K(GeneralWeightPair::matukuma_ab(3.0, 1.0), 2.0, 4.0, nl());
  for (double r : log_grid(1e-8, 1e8, 101)) {
    CHECK(T.inverse(T.forward(r)) == doctest::Approx(r).epsilon(1e-10));
    CHECK(T.dt_dr(r) > 0.0);
  }
}

TEST_CASE("closed form map for the Matukuma pair with N = 4") {
  // a = r^2, b = r^2/(1+r): h = 1/r, t = sqrt(r), K~ = 4 t^2 / (1 + t^2)
  auto T = transform_ab_to_K(GeneralWeightPair::matukuma_ab(3.0, 1.0), 2.0, 4.0, nl());
  for (double r : {1e-4, 0.3, 1.0, 7.0, 1e4}) {
    double t = T.forward(r);
    CHECK(t == doctest::Approx(std::sqrt(r)).epsilon(1e-10));
    CHECK(T.K_at_r(r).K == doctest::Approx(4.0 * t * t / (1.0 + t * t)).epsilon(1e-9));
  }
}

TEST_CASE("g through the closed form agrees with numerical differentiation") {
  std::vector<TransformedModel> Ts = {
      transform_ab_to_K(GeneralWeightPair::matukuma_ab(3.0, 1.0), 2.0, 4.0, nl()),
      transform_ab_to_K(GeneralWeightPair::power_ab(2.0, 1.5, 1.0, 2.0), 2.0, 3.5, nl()),
      transform_ab_to_K(GeneralWeightPair::power_ab(2.5, 2.0, 2.0, 1.0), 3.0, 4.5, nl())};
  for (const auto& T : Ts) {
    for (double r : log_grid(1e-3, 1e3, 25)) {
      double g = T.g_identity(r);
      CAPTURE(r);
      CHECK(std::abs(g - numeric_g(T, r)) < 1e-8 * (1.0 + std::abs(g)));
      CHECK(std::abs(g - (T.p() + T.K_at_r(r).slope)) < 1e-12 * (1.0 + std::abs(g)));
    }
  }
}

TEST_CASE("identity map when N = n") {
  auto T = transform_ab_to_K(GeneralWeightPair::matukuma_ab(3.0, 1.0), 2.0, 3.0, nl());
  for (double r : {1e-3, 1.0, 1e3}) {
    CHECK(T.forward(r) == doctest::Approx(r).epsilon(1e-12));
    CHECK(T.K_at_r(r).K == doctest::Approx(1.0 / (1.0 + r)).epsilon(1e-12));
  }
}

TEST_CASE("pulled back shot matches the direct solve") {
  auto T = transform_ab_to_K(GeneralWeightPair::matukuma_ab(3.0, 1.0), 2.0, 4.0, nl());
  ProblemModel direct(Parameters(2.0, 3.0), Weight::matukuma(1.0), nl());
  Trajectory d = integrate_ivp(direct, 3.0), t = integrate_ivp(T.model(), 3.0);
  for (const auto& nd : d.nodes()) {
    if (nd.u <= 1e-3 || T.forward(nd.r) > t.R()) continue;
    CHECK(std::abs(T.u_pulled(t, nd.r) / nd.u - 1.0) < 1e-6);
  }
}

TEST_CASE("transformed config is readable") {
  auto T = transform_ab_to_K(GeneralWeightPair::matukuma_ab(3.0, 1.0), 2.0, 4.0, nl());
  ProblemModel back = model_from_json(T.config());
  CHECK(back.params.n == 4.0);
  for (double t : {0.01, 1.0, 50.0}) CHECK(back.weight.K(t) == doctest::Approx(4 * t * t / (1 + t * t)).epsilon(1e-6));
}

TEST_CASE("pair config parsing is strict") {
  nlohmann::json doc = {{"p", 2},
                        {"N", 4},
                        {"pair", {{"family", "matukuma_ab"}, {"params", {{"n", 3}, {"sigma", 1}}}}},
                        {"nonlinearity", {{"family", "power_diff"}, {"params", {{"q1", 3}, {"q2", 0.5}}}}}};
  CHECK_NOTHROW(transform_from_json(doc));
  doc["pair"]["params"]["extra"] = 1;
  CHECK_THROWS_AS(transform_from_json(doc), UsageError);
}

TEST_CASE("b not integrable at infinity is a domain error") {
  // a = r with p = 2: the integral of 1/a from r to infinity diverges
  CHECK_THROWS_AS(transform_ab_to_K(GeneralWeightPair::power_ab(1.0, 2.0, 1.0, 0.0), 2.0, 4.0, nl()), DomainError);
}

TEST_CASE("q-change for a power weight has a closed form") {
  for (double theta : {-1.0, -0.5, 0.5}) {
    ProblemModel m(Parameters(2.0, 3.0), Weight::power(theta), nl());
    QtChange Q = qt_change(m);
    double c = 1.0 + theta / 2.0;
    for (double r : {1e-3, 0.2, 1.0, 40.0}) {
      CAPTURE(theta);
      CHECK(Q.t_of_r(r) == doctest::Approx(std::pow(r, c) / c).epsilon(1e-10));
      CHECK(Q.r_of_t(Q.t_of_r(r)) == doctest::Approx(r).epsilon(1e-10));
    }
  }
}

TEST_CASE("q log-slope stays under its bound") {
  ProblemModel m(Parameters(2.0, 3.0), Weight::matukuma(2.0), nl());
  QtChange Q = qt_change(m);
  for (double r : log_grid(1e-3, 1e3, 31)) {
    double t = Q.t_of_r(r);
    CHECK(Q.log_slope_q(t) <= Q.slope_bound(t) + 1e-9);
  }
}

TEST_CASE("compact support integral") {
  // independent value of int_0^delta |F|^{-1/2} for f = u^3 - u^{1/2}
  Nonlinearity f = nl();
  double delta = 1e-2;
  // u = v^4 removes the endpoint singularity
  auto g = [&](double v) { return 4.0 * v * v * v / std::sqrt(-f.F(v * v * v * v)); };
  double ref = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 0.0, std::pow(delta, 0.25), 15, 1e-12);
  auto R = compact_support_test(f, 0.5, delta);
  CHECK(R.verdict == SupportVerdict::finite);
  CHECK(R.value == doctest::Approx(ref).epsilon(1e-6));

  auto lin = compact_support_test(Nonlinearity::power_diff(3.0, 1.0), 0.5, delta);
  CHECK(lin.verdict == SupportVerdict::infinite);
  auto sup = compact_support_test(Nonlinearity::power_diff(3.0, 1.5), 0.5, delta);
  CHECK(sup.verdict == SupportVerdict::infinite);
  CHECK_THROWS(compact_support_test(f, 0.5, 2.0));
}
