#include "plshoot/uniqueness.hpp"

#include <algorithm>
#include <cmath>

#include "plshoot/config.hpp"
#include "plshoot/error.hpp"
#include "plshoot/parallel.hpp"
#include "plshoot/variational.hpp"

namespace plshoot {

namespace {

constexpr int kMaxBisect = 200;
constexpr int kMaxDoubling = 60;
constexpr std::size_t kSGrid = 48;

enum class Side { positive, crossing, undecided };

// GroundCandidate is split by the raw event: an exact zero of u counts as a crossing
Side side_of(const ShotOutcome& o) {
  switch (o.kind) {
    case ShotKind::Crossing: return Side::crossing;
    case ShotKind::Positive: return Side::positive;
    case ShotKind::GroundCandidate:
      return o.stop == StopEvent::u_hit_zero ? Side::crossing
             : o.stop == StopEvent::step_failure ? Side::undecided
                                                 : Side::positive;
    case ShotKind::Inconclusive: return Side::undecided;
  }
  return Side::undecided;
}

std::string g17(double v) { return format_double(v); }

nlohmann::json witness_json(const Witness& w) { return {{"at", w.at}, {"detail", w.detail}}; }

}  // namespace

BracketResult find_ground_state(const ProblemModel& model, double alpha_lo, double alpha_hi, double tol_alpha,
                                const IntegratorControls& controls) {
  if (!(tol_alpha > 0.0)) throw DomainError("bisection tolerance must be positive", {{"tol", tol_alpha}});
  if (!(alpha_lo < alpha_hi))
    throw DomainError("bracket needs alpha_lo < alpha_hi", {{"lo", alpha_lo}, {"hi", alpha_hi}});
  ShotOutcome lo = classify(model, alpha_lo, controls);
  ShotOutcome hi = classify(model, alpha_hi, controls);
  if (lo.kind != ShotKind::Positive || hi.kind != ShotKind::Crossing)
    throw DomainError("bracket endpoints must classify Positive (lo) and Crossing (hi)",
                      {{"lo", alpha_lo}, {"lo_kind", to_string(lo.kind)}, {"hi", alpha_hi},
                       {"hi_kind", to_string(hi.kind)}});

  BracketResult B;
  B.alpha_lo = alpha_lo;
  B.alpha_hi = alpha_hi;
  while (B.alpha_hi - B.alpha_lo >= tol_alpha && B.iterations < kMaxBisect) {
    double mid = 0.5 * (B.alpha_lo + B.alpha_hi);
    if (!(mid > B.alpha_lo && mid < B.alpha_hi)) break;  // no representable midpoint left
    ShotOutcome o = classify(model, mid, controls);
    Side s = side_of(o);
    if (s == Side::undecided) {
      o = classify(model, mid, controls.tightened(10.0));
      s = side_of(o);
    }
    if (s == Side::undecided) {
      B.flagged.push_back(mid);
      B.invariant_held = false;
      s = Side::positive;
    }
    if (s == Side::crossing)
      B.alpha_hi = mid;
    else
      B.alpha_lo = mid;
    ++B.iterations;
    B.widths.push_back(B.alpha_hi - B.alpha_lo);
  }
  B.width = B.alpha_hi - B.alpha_lo;
  B.converged = B.width < tol_alpha;
  B.best_candidate = classify(model, 0.5 * (B.alpha_lo + B.alpha_hi), controls);
  return B;
}

std::vector<std::pair<std::size_t, std::size_t>> kind_transitions(const std::vector<ShotOutcome>& outcomes) {
  std::vector<std::pair<std::size_t, std::size_t>> t;
  std::optional<std::size_t> last;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    ShotKind k = outcomes[i].kind;
    if (k != ShotKind::Positive && k != ShotKind::Crossing) continue;
    if (last && outcomes[*last].kind != k) t.emplace_back(*last, i);
    last = i;
  }
  return t;
}

ScanResult scan_for_bracket(const ProblemModel& model, double lo, double hi, std::size_t count,
                            const IntegratorControls& controls, unsigned threads) {
  ScanResult S;
  S.outcomes = sweep(model, lo, hi, count, controls, AlphaGrid::geometric, threads);
  S.transitions = kind_transitions(S.outcomes);
  for (auto [i, j] : S.transitions)
    if (S.outcomes[i].kind == ShotKind::Positive && S.outcomes[j].kind == ShotKind::Crossing) {
      S.bracket = std::make_pair(S.outcomes[i].alpha, S.outcomes[j].alpha);
      break;
    }
  return S;
}

DirichletResult solve_dirichlet(const ProblemModel& model, double R_target, double alpha_seed, double tol,
                                const IntegratorControls& controls) {
  if (!(R_target > 0.0) || !(tol > 0.0))
    throw DomainError("Dirichlet radius and tolerance must be positive", {{"R", R_target}, {"tol", tol}});
  const double u0 = model.u0();
  Trajectory seed = integrate_ivp(model, alpha_seed, controls);
  ShotOutcome so = classify_trajectory(model, seed);
  if (so.kind != ShotKind::Crossing)
    throw DomainError("Dirichlet seed must be a crossing shot", {{"alpha", alpha_seed}, {"kind", to_string(so.kind)}});

  DirichletResult D;
  auto accept = [&](double a, Trajectory t) {
    D.alpha = a;
    D.R = t.R();
    D.trajectory = std::move(t);
  };
  if (std::abs(so.R - R_target) < tol) {
    accept(alpha_seed, std::move(seed));
    return D;
  }
  // hi side: crossing with R below the target
  struct Shot {
    bool hi_side;
    Trajectory traj;
  };
  auto shoot = [&](double a) {
    Trajectory t = integrate_ivp(model, a, controls);
    ShotOutcome o = classify_trajectory(model, t);
    bool crossing = side_of(o) == Side::crossing && t.stop_event() == StopEvent::u_hit_zero;
    return Shot{crossing && t.R() < R_target, std::move(t)};
  };

  double lo, hi;
  if (so.R < R_target) {
    hi = alpha_seed;
    lo = alpha_seed;
    bool found = false;
    for (int k = 1; k <= kMaxDoubling; ++k) {
      lo = u0 + (alpha_seed - u0) * std::ldexp(1.0, -k);
      Shot s = shoot(lo);
      if (!s.hi_side) {
        found = true;
        break;
      }
      hi = lo;
    }
    if (!found)
      throw DomainError("Dirichlet radius is above every reachable R", {{"R_target", R_target}, {"seed", alpha_seed}});
  } else {
    lo = alpha_seed;
    hi = alpha_seed;
    bool found = false;
    for (int k = 1; k <= kMaxDoubling; ++k) {
      hi = alpha_seed * std::ldexp(1.0, k);
      Shot s = shoot(hi);
      if (s.hi_side) {
        found = true;
        break;
      }
      lo = hi;
    }
    if (!found)
      throw DomainError("Dirichlet radius is below every reachable R", {{"R_target", R_target}, {"seed", alpha_seed}});
  }

  for (int it = 0; it < kMaxBisect; ++it) {
    double mid = 0.5 * (lo + hi);
    D.iterations = it + 1;
    if (!(mid > lo && mid < hi)) break;
    Shot s = shoot(mid);
    bool crossing = s.traj.stop_event() == StopEvent::u_hit_zero;
    if (crossing && std::abs(s.traj.R() - R_target) < tol) {
      accept(mid, std::move(s.traj));
      return D;
    }
    if (s.hi_side)
      hi = mid;
    else
      lo = mid;
  }
  throw DomainError("Dirichlet radius not attained: it lies at or beyond the supremum of R over crossing shots",
                    {{"R_target", R_target}, {"alpha_lo", lo}, {"alpha_hi", hi}});
}

bool SuiteReport::passed() const {
  for (const auto& c : checks)
    if (!c.informational && !c.pass) return false;
  return true;
}

const SuiteCheck* SuiteReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

SuiteReport verify_suite(const ProblemModel& model, const BracketResult& bracket, double delta_rel,
                         std::size_t samples, const IntegratorControls& controls, unsigned threads) {
  const double p = model.params.p, n = model.params.n;
  const double u0 = model.u0();
  if (!(delta_rel > 0.0) || samples == 0)
    throw DomainError("verification needs delta_rel > 0 and at least one sample", {{"delta_rel", delta_rel}});
  SuiteReport Rep;
  Rep.alpha_lo = bracket.alpha_lo;
  Rep.alpha_hi = bracket.alpha_hi;
  double abar = bracket.alpha_hi;
  double delta = delta_rel * abar;
  Rep.delta = delta;

  std::vector<double> above, below;
  for (std::size_t i = 1; i <= samples; ++i) {
    above.push_back(bracket.alpha_hi + delta * double(i) / double(samples));
    double b = bracket.alpha_lo - delta * double(i) / double(samples);
    if (b > u0) below.push_back(b);
  }
  std::reverse(below.begin(), below.end());

  // all shots needed by the checks, integrated once
  std::vector<double> alphas = below;
  alphas.push_back(bracket.alpha_lo);
  alphas.push_back(bracket.alpha_hi);
  alphas.insert(alphas.end(), above.begin(), above.end());
  const std::size_t i_lo = below.size(), i_hi = below.size() + 1;
  auto trajs = parallel_map<Trajectory>(alphas.size(), threads,
                                        [&](std::size_t i) { return integrate_ivp(model, alphas[i], controls); });
  std::vector<ShotOutcome> outs(alphas.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) outs[i] = classify_trajectory(model, trajs[i]);
  Rep.below.assign(outs.begin(), outs.begin() + long(i_lo));
  Rep.above.assign(outs.begin() + long(i_hi) + 1, outs.end());

  auto make = [&](const std::string& name) {
    SuiteCheck c;
    c.name = name;
    c.delta_tested = delta_rel;
    return c;
  };
  auto fail = [](SuiteCheck& c, double at, const std::string& why) {
    c.pass = false;
    if (c.witnesses.size() < 16) c.witnesses.push_back({at, why});
  };

  // kinds on both sides of the bracket
  {
    SuiteCheck c = make("separation_kinds");
    for (std::size_t i = 0; i < outs.size(); ++i) {
      bool want_cross = i >= i_hi;
      ShotKind want = want_cross ? ShotKind::Crossing : ShotKind::Positive;
      if (outs[i].kind != want) fail(c, alphas[i], "classified " + to_string(outs[i].kind) + ", expected " + to_string(want));
    }
    Rep.checks.push_back(c);
  }

  const Trajectory& ref = trajs[i_hi];
  std::vector<double> sgrid = log_grid(1e-3 * u0, 0.99 * u0, kSGrid);

  // comparison of two crossing shots a < b in the s-parametrization
  auto compare = [&](SuiteCheck& c, const Trajectory& ta, const Trajectory& tb) {
    InverseProfile ia(ta), ib(tb);
    for (double s : sgrid) {
      double t1 = ia.t(s), t2 = ib.t(s);
      double w1 = t1 * std::abs(ta.du_at(t1)), w2 = t2 * std::abs(tb.du_at(t2));
      if (!(t2 < t1)) fail(c, s, "t(s) " + g17(t2) + " at alpha " + g17(tb.alpha()) + " not below " + g17(t1));
      if (!(w2 > w1)) fail(c, s, "t|u'| " + g17(w2) + " at alpha " + g17(tb.alpha()) + " not above " + g17(w1));
    }
    if (ta.stop_event() == StopEvent::u_hit_zero && tb.stop_event() == StopEvent::u_hit_zero) {
      double wa = ta.R() * std::abs(ta.terminal().du), wb = tb.R() * std::abs(tb.terminal().du);
      if (!(tb.R() < ta.R())) fail(c, 0.0, "R " + g17(tb.R()) + " at alpha " + g17(tb.alpha()) + " not below " + g17(ta.R()));
      if (!(wb > wa)) fail(c, 0.0, "R|u'(R)| at alpha " + g17(tb.alpha()) + " not above " + g17(wa));
    }
  };

  // separation below u0 against the upper bracket endpoint
  {
    SuiteCheck c = make("trajectory_separation");
    for (std::size_t i = i_hi + 1; i < outs.size(); ++i) {
      if (outs[i].kind != ShotKind::Crossing) {
        fail(c, alphas[i], "sample is not a crossing shot");
        continue;
      }
      compare(c, ref, trajs[i]);
    }
    Rep.checks.push_back(c);
  }

  // r0 non-increasing, r0|u'(r0)| increasing
  {
    SuiteCheck c = make("r0_monotone");
    std::optional<std::size_t> prev;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      if (!trajs[i].r0()) {
        fail(c, alphas[i], "shot never reaches u0");
        continue;
      }
      if (prev) {
        double r_a = *trajs[*prev].r0(), r_b = *trajs[i].r0();
        double w_a = r_a * std::abs(*trajs[*prev].du_r0()), w_b = r_b * std::abs(*trajs[i].du_r0());
        if (r_b > r_a) fail(c, alphas[i], "r0 " + g17(r_b) + " above " + g17(r_a) + " at the smaller alpha");
        if (!(w_b > w_a)) fail(c, alphas[i], "r0|u'(r0)| " + g17(w_b) + " not above " + g17(w_a));
      }
      prev = i;
    }
    Rep.checks.push_back(c);
  }

  // crossing measure on crossing samples
  {
    SuiteCheck c = make("crossing_measure_increasing");
    std::optional<double> prev;
    for (std::size_t i = i_hi; i < outs.size(); ++i) {
      if (!outs[i].crossing_measure) continue;
      double e = *outs[i].crossing_measure;
      if (prev && !(e > *prev)) fail(c, alphas[i], "E(R) " + g17(e) + " not above " + g17(*prev));
      prev = e;
    }
    if (!prev) fail(c, abar, "no crossing samples");
    Rep.checks.push_back(c);
  }

  // Kwong monotonicity on the bracket endpoints
  {
    SuiteCheck c = make("kwong_monotone");
    for (std::size_t i : {i_lo, i_hi}) {
      if (!trajs[i].r0()) {
        fail(c, alphas[i], "shot never reaches u0");
        continue;
      }
      KwongReport k = kwong_check(model, trajs[i]);
      if (!k.decreasing) fail(c, k.witness->at, "alpha " + g17(alphas[i]) + ": " + k.witness->detail);
      if (!k.endpoint_negative)
        fail(c, *trajs[i].r0(), "alpha " + g17(alphas[i]) + ": (n-p)/(p-1) u0 + r0 u'(r0) = " + g17(k.endpoint));
    }
    Rep.checks.push_back(c);
  }

  // I(s, .) > 0 against the upper endpoint as reference
  {
    SuiteCheck c = make("capital_I_positive");
    try {
      CapitalI ci(model, ref);
      for (std::size_t i = i_hi; i < outs.size(); ++i) {
        if (outs[i].kind != ShotKind::Crossing) continue;
        std::vector<double> ss = sgrid;
        ss.push_back(u0);
        for (double s : ss) {
          double I = ci.I(s, trajs[i]);
          if (!(I > 0.0)) fail(c, s, "I = " + g17(I) + " at alpha " + g17(alphas[i]));
        }
      }
    } catch (const Error& e) {
      fail(c, abar, e.what());
    }
    Rep.checks.push_back(c);
  }

  // G increasing from -(n-p) with one sign change on the reference shot
  {
    SuiteCheck c = make("G_profile");
    try {
      InverseProfile inv(ref);
      double top = ref.alpha();
      double g0 = eval_G(model, inv, u0 * (1.0 + 1e-7));
      if (std::abs(g0 + (n - p)) > 1e-3 * (n - p)) fail(c, u0, "G(u0+) = " + g17(g0) + ", expected " + g17(-(n - p)));
      std::vector<double> grid;
      for (std::size_t k = 1; k < 200; ++k) grid.push_back(u0 + (top - u0) * double(k) / 200.0);
      double prev = g0;
      int changes = 0;
      for (double s : grid) {
        double g = eval_G(model, inv, s);
        if (!(g > prev)) fail(c, s, "G = " + g17(g) + " not above " + g17(prev));
        if ((g > 0.0) != (prev > 0.0)) ++changes;
        prev = g;
      }
      if (changes != 1) fail(c, top, "G changes sign " + std::to_string(changes) + " times on (u0, alpha)");
    } catch (const Error& e) {
      fail(c, abar, e.what());
    }
    Rep.checks.push_back(c);
  }

  // signs of the alpha-derivatives at the bracket endpoints
  {
    SuiteCheck c = make("derivative_signs");
    for (double a : {bracket.alpha_lo, bracket.alpha_hi}) {
      try {
        AlphaDerivatives D = alpha_derivatives(model, a, controls);
        if (D.dr0_dalpha > 0.0) fail(c, a, "dr0/dalpha = " + g17(D.dr0_dalpha) + " > 0");
        if (!(D.d_r0du_dalpha < 0.0)) fail(c, a, "d(r0 u'(r0))/dalpha = " + g17(D.d_r0du_dalpha) + " >= 0");
      } catch (const Error& e) {
        fail(c, a, e.what());
      }
    }
    Rep.checks.push_back(c);
  }

  // far from the bracket the slope comparison has no guarantee; reported only
  {
    SuiteCheck c = make("far_field_separation");
    c.informational = true;
    std::vector<double> far{2.0 * abar, 4.0 * abar, 8.0 * abar};
    auto ft = parallel_map<Trajectory>(far.size(), threads,
                                       [&](std::size_t i) { return integrate_ivp(model, far[i], controls); });
    const Trajectory* prev = &ref;
    for (const auto& t : ft) {
      if (t.stop_event() != StopEvent::u_hit_zero) {
        fail(c, t.alpha(), "far sample is not a crossing shot");
        continue;
      }
      compare(c, *prev, t);
      prev = &t;
    }
    Rep.checks.push_back(c);
  }
  return Rep;
}

nlohmann::json to_json(const BracketResult& b) {
  return {{"alpha_lo", b.alpha_lo},
          {"alpha_hi", b.alpha_hi},
          {"width", b.width},
          {"iterations", b.iterations},
          {"converged", b.converged},
          {"invariant_held", b.invariant_held},
          {"flagged", b.flagged},
          {"best_candidate", to_json(b.best_candidate)}};
}

nlohmann::json to_json(const SuiteReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    nlohmann::json w = nlohmann::json::array();
    for (const auto& x : c.witnesses) w.push_back(witness_json(x));
    checks.push_back({{"name", c.name},
                      {"pass", c.pass},
                      {"informational", c.informational},
                      {"witnesses", w},
                      {"delta_tested", c.delta_tested}});
  }
  return {{"pass", r.passed()},
          {"alpha_lo", r.alpha_lo},
          {"alpha_hi", r.alpha_hi},
          {"delta", r.delta},
          {"checks", checks}};
}

}  // namespace plshoot
