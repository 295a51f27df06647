#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "plshoot/classify.hpp"
#include "plshoot/error.hpp"

using namespace plshoot;

namespace {
ProblemModel canonical() {
  return ProblemModel(Parameters(2.0, 3.0), Weight::matukuma(2.0), Nonlinearity::power_diff(3.0, 0.5));
}
}  // namespace

TEST_CASE("kinds on either side of the ground state") {
  ProblemModel m = canonical();
  ShotOutcome lo = classify(m, 3.0);
  CHECK(lo.kind == ShotKind::Positive);
  CHECK(lo.E_R < 0.0);
  CHECK(lo.E_R == doctest::Approx(m.nonlinearity.F(lo.u_R)).epsilon(1e-10));
  CHECK_FALSE(lo.crossing_measure);

  ShotOutcome hi = classify(m, 6.0);
  CHECK(hi.kind == ShotKind::Crossing);
  CHECK(hi.E_R > 0.0);
  REQUIRE(hi.crossing_measure);
  // at the crossing F(0) = 0, so E(R) = |u'(R)|^p / (p' K(R))
  CHECK(*hi.crossing_measure == doctest::Approx(hi.du_R * hi.du_R / (2.0 * m.weight.K(hi.R))).epsilon(1e-10));
  REQUIRE(hi.r0);
  REQUIRE(lo.r0);
  CHECK(*hi.r0 < *lo.r0);
}

TEST_CASE("alpha at or below u0 is rejected") {
  ProblemModel m = canonical();
  CHECK_THROWS_AS(classify(m, 0.5), DomainError);
  CHECK_THROWS_AS(classify(m, 1.0), DomainError);
}

TEST_CASE("sweep energy signatures") {
  ProblemModel m = canonical();
  auto outs = sweep(m, 1.01, 50.0, 24);
  REQUIRE(outs.size() == 24);
  for (const auto& o : outs) {
    CAPTURE(o.alpha);
    if (o.kind == ShotKind::Crossing) CHECK(o.E_R > 0.0);
    if (o.kind == ShotKind::Positive) CHECK(o.E_R < 0.0);
  }
  CHECK(outs.front().kind == ShotKind::Positive);
  CHECK(outs.back().kind == ShotKind::Crossing);
}

TEST_CASE("sweep results do not depend on the thread count") {
  ProblemModel m = canonical();
  auto a = sweep(m, 1.5, 20.0, 12, {}, AlphaGrid::geometric, 1);
  auto b = sweep(m, 1.5, 20.0, 12, {}, AlphaGrid::geometric, 4);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(to_json(a[i]).dump() == to_json(b[i]).dump());
}

TEST_CASE("alpha grids") {
  auto g = alpha_grid(1.0, 100.0, 3);
  CHECK(g[1] == doctest::Approx(10.0));
  auto l = alpha_grid(1.0, 3.0, 3, AlphaGrid::linear);
  CHECK(l[1] == doctest::Approx(2.0));
  CHECK(g.front() == 1.0);
  CHECK(g.back() == 100.0);
}

TEST_CASE("outcome JSON carries every field") {
  ProblemModel m = canonical();
  auto j = to_json(classify(m, 6.0));
  for (const char* k : {"alpha", "kind", "R", "u_R", "du_R", "E_R", "r0", "crossing_measure", "stop_event", "truncated"})
    CHECK(j.contains(k));
  CHECK(j["kind"] == "Crossing");
}
