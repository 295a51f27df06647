// Acceptance run: one line per criterion, exit status 1 when any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "json.hpp"
#include "plshoot/classify.hpp"
#include "plshoot/cli.hpp"
#include "plshoot/config.hpp"
#include "plshoot/transform.hpp"
#include "plshoot/uniqueness.hpp"
#include "plshoot/variational.hpp"

using namespace plshoot;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

ProblemModel canonical() {
  return ProblemModel(Parameters(2.0, 3.0), Weight::matukuma(2.0), Nonlinearity::power_diff(3.0, 0.5));
}

// one model per p for the p-sweeps, with initial heights whose shots pass below u0
struct PCase {
  ProblemModel model;
  std::vector<double> alphas;
};

std::vector<PCase> p_cases() {
  auto nl = Nonlinearity::power_diff(3.0, 0.5);
  return {{ProblemModel(Parameters(1.5, 3.0), Weight::matukuma(1.0), nl), {1.5, 2.2, 3.0}},
          {canonical(), {3.0, 5.0, 9.0}},
          {ProblemModel(Parameters(3.0, 4.0), Weight::matukuma(2.0), nl), {2.0, 4.0, 8.0}}};
}

std::string g(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

// ---- 1: hypothesis certification

Verdict criterion1() {
  Verdict v;
  int k_cases = 0, f_cases = 0;
  std::vector<std::string> miss;
  for (double p : {1.5, 2.0, 3.0}) {
    Parameters P(p, p + 1.0);
    auto grid = default_weight_grid();
    std::vector<Weight> good;
    for (double s : {0.25 * p, 0.5 * p, p}) good.push_back(Weight::matukuma(s));
    // the stellar weight tends to r^{-2}, so g tends to p - 2
    if (p >= 2.0)
      for (double s : {0.5, 2.0, 5.0}) good.push_back(Weight::stellar(s));
    for (double th : {-p, -1.0, 0.5})
      for (double a : {0.5, 2.0}) good.push_back(Weight::power_log(th, a));
    for (double th : {-p, 0.0, 1.0}) good.push_back(Weight::log_gaussian(th));
    for (const auto& w : good) {
      ++k_cases;
      if (!check_K1(w, P, grid).passed()) miss.push_back("K1 rejected " + w.family() + w.params().dump() + " p=" + g(p));
    }
    ++k_cases;
    HypothesisReport bad = check_K1(Weight::matukuma(p + 1.0), P, grid);
    bool witnessed = false;
    for (const auto& c : bad.checks) witnessed |= !c.pass && c.witness.has_value();
    if (bad.passed() || !witnessed) miss.push_back("K1 accepted matukuma sigma=p+1, p=" + g(p));

    // f: admissible iff 0 < q2 < p-1 <= q1; the grid reaches far enough for asymptotic failures
    auto fgrid = default_f_grid(1.0, 1e6);
    double e = p - 1.0;
    std::vector<double> q1s = {0.5 * e, e, 1.5 * e, 3.0, 5.0};
    std::vector<double> q2s = {0.2 * e, 0.5 * e, 0.9 * e, e, 1.5 * e};
    for (double q1 : q1s)
      for (double q2 : q2s) {
        if (q1 == q2) continue;
        ++f_cases;
        bool expect = q2 > 0.0 && q2 < e && e <= q1;
        HypothesisReport r = check_f_hypotheses(Nonlinearity::power_diff(q1, q2), P, fgrid);
        if (r.passed() != expect) {
          std::string why;
          for (const auto& c : r.checks)
            if (!c.pass) why += " " + c.name;
          miss.push_back("f p=" + g(p) + " q1=" + g(q1) + " q2=" + g(q2) + (expect ? " expected pass, failed" + why
                                                                                      : " expected fail, passed"));
        }
      }
  }
  v.pass = miss.empty();
  v.detail = std::to_string(k_cases) + " weight cases, " + std::to_string(f_cases) + " nonlinearity cases, " +
             std::to_string(miss.size()) + " mismatches";
  for (std::size_t i = 0; i < miss.size(); ++i) v.detail += (i ? "; " : ": ") + miss[i];
  return v;
}

// ---- 2: self-convergence

Verdict criterion2() {
  Verdict v;
  std::string d;
  for (const auto& c : p_cases()) {
    double alpha = c.alphas[1];
    IntegratorControls ref;
    Trajectory t0 = integrate_ivp(c.model, alpha, ref);
    double rstar = 0.5 * (t0.r0() ? *t0.r0() : t0.R());
    std::vector<double> u, steps;
    for (double tol : {1e-6, 1e-8, 1e-10}) {
      IntegratorControls k;
      k.rel_tol = tol;
      k.abs_tol = 1e-2 * tol;
      Trajectory t = integrate_ivp(c.model, alpha, k);
      u.push_back(t.u_at(rstar));
      steps.push_back(double(t.steps()));
    }
    double d1 = std::abs(u[0] - u[1]), d2 = std::abs(u[1] - u[2]);
    // error against the step count, the scale on which the order of a one-step scheme is defined
    double order = std::log(d1 / d2) / std::log(std::sqrt(steps[2] / steps[0]));
    double per_decade = std::log10(d1 / d2) / 2.0;
    bool ok = std::isfinite(order) && order >= 2.0;
    v.pass &= ok;
    d += "p=" + g(c.model.params.p) + " order " + g(order) + " (error per tolerance decade " + g(per_decade) + ") ";
  }
  v.detail = d;
  return v;
}

// ---- 3: integral-form residual

// sup over nodes of |m(r) + int_0^r s^{n-1} K f(u)|, relative to sup |m|; 20-point Gauss in log r per step
double residual(const ProblemModel& m, const Trajectory& t, double* where = nullptr) {
  using GL = boost::math::quadrature::gauss<double, 20>;
  double n = m.params.n;
  auto src = [&](double s) { return std::pow(s, n - 1.0) * m.weight.K(s) * m.nonlinearity.f_odd(t.u_at(s)); };
  auto src_x = [&](double x) {
    double s = std::exp(x);
    return s * src(s);
  };
  double acc = 0.0, prev = 0.0, worst = 0.0, scale = 0.0;
  for (const auto& nd : t.nodes()) scale = std::max(scale, std::abs(nd.m));
  for (const auto& nd : t.nodes()) {
    if (nd.r == 0.0) continue;
    acc += prev == 0.0 ? GL::integrate(src, 0.0, nd.r) : GL::integrate(src_x, std::log(prev), std::log(nd.r));
    prev = nd.r;
    double e = std::abs(nd.m + acc);
    if (e > worst) {
      worst = e;
      if (where) *where = nd.r;
    }
  }
  return worst / std::max(scale, 1e-300);
}

Verdict criterion3() {
  Verdict v;
  double worst = 0.0, worst_alpha = 0.0, worst_r = 0.0, worst_p = 0.0;
  int shots = 0;
  IntegratorControls k;
  auto add = [&](const ProblemModel& m, double alpha) {
    double at = 0.0;
    double r = residual(m, integrate_ivp(m, alpha, k), &at);
    if (r > worst) {
      worst = r;
      worst_alpha = alpha;
      worst_r = at;
      worst_p = m.params.p;
    }
    ++shots;
  };
  ProblemModel m = canonical();
  for (double a : alpha_grid(1.01, 50.0, 64)) add(m, a);
  for (const auto& c : p_cases())
    for (double a : c.alphas) add(c.model, a);
  v.pass = worst < 100.0 * k.rel_tol;
  v.detail = std::to_string(shots) + " shots, worst relative residual " + g(worst) + " at p=" + g(worst_p) +
             " alpha=" + g(worst_alpha) + " r=" + g(worst_r) + " (bound " + g(100.0 * k.rel_tol) + ")";
  return v;
}

// ---- 4: energy

Verdict criterion4() {
  Verdict v;
  ProblemModel m = canonical();
  auto alphas = alpha_grid(1.01, 50.0, 64);
  int rises = 0, sign_bad = 0, pos = 0, cross = 0;
  double worst_rise = 0.0;
  for (double a : alphas) {
    Trajectory t = integrate_ivp(m, a);
    double E0 = energy_at_node(m, t.nodes().front()).E;
    double prev = E0;
    for (const auto& nd : t.nodes()) {
      double E = energy_at_node(m, nd).E;
      double rise = E - prev;
      if (rise > 1e-8 * (1.0 + std::abs(E0))) ++rises;
      worst_rise = std::max(worst_rise, rise / (1.0 + std::abs(E0)));
      prev = E;
    }
    ShotOutcome o = classify_trajectory(m, t);
    if (o.kind == ShotKind::Crossing) {
      ++cross;
      if (!(o.E_R > 0.0)) ++sign_bad;
    } else if (o.kind == ShotKind::Positive) {
      ++pos;
      double F = m.nonlinearity.F(o.u_R);
      if (!(o.E_R < 0.0) || std::abs(o.E_R - F) > 1e-8 * (1.0 + std::abs(F))) ++sign_bad;
    }
  }
  v.pass = rises == 0 && sign_bad == 0;
  v.detail = "64 shots (" + std::to_string(pos) + " Positive, " + std::to_string(cross) + " Crossing), " +
             std::to_string(rises) + " energy increases (largest relative step " + g(worst_rise) + "), " +
             std::to_string(sign_bad) + " sign violations";
  return v;
}

// ---- 5: bracketing

Verdict criterion5(BracketResult& out) {
  Verdict v;
  ProblemModel m = canonical();
  ScanResult S = scan_for_bracket(m, 1.01, 50.0, 64);
  if (!S.bracket || S.transitions.size() != 1) {
    v.pass = false;
    v.detail = std::to_string(S.transitions.size()) + " transitions in the 64-shot sweep";
    return v;
  }
  BracketResult B = find_ground_state(m, S.bracket->first, S.bracket->second, 1e-8);
  out = B;
  auto outs = sweep(m, 1.001, 100.0 * B.alpha_hi, 256);
  auto tr = kind_transitions(outs);
  v.pass = B.converged && B.width < 1e-8 && B.invariant_held && tr.size() == 1;
  v.detail = "bracket [" + format_double(B.alpha_lo) + ", " + format_double(B.alpha_hi) + "] width " + g(B.width) +
             ", invariant " + (B.invariant_held ? "held" : "violated") + ", " + std::to_string(tr.size()) +
             " transition(s) in 256 shots up to " + g(100.0 * B.alpha_hi);
  return v;
}

// ---- 6: variational

Verdict criterion6() {
  Verdict v;
  IntegratorControls k;
  k.rel_tol = 1e-12;
  k.abs_tol = 1e-14;
  double wphi = 0.0, wr0 = 0.0;
  int n = 0;
  for (const auto& c : p_cases())
    for (double a : c.alphas) {
      FiniteDifferenceCheck F = fd_check(c.model, a, 1e-6 * a, k);
      wphi = std::max(wphi, F.phi_rel_err);
      wr0 = std::max(wr0, F.dr0_rel_err);
      ++n;
      if (!(F.phi_rel_err < 1e-4 && F.dr0_rel_err < 1e-3)) {
        v.pass = false;
        v.detail += "p=" + g(c.model.params.p) + " alpha=" + g(a) + " off; ";
      }
    }
  v.detail += std::to_string(n) + " shots over p in {1.5, 2, 3}: worst phi error " + g(wphi) + ", worst dr0/dalpha error " +
              g(wr0);
  return v;
}

// ---- 7: separation suite

Verdict criterion7(const BracketResult& B) {
  Verdict v;
  ProblemModel m = canonical();
  SuiteReport R = verify_suite(m, B, 1e-2);
  int counted = 0;
  std::string bad, info;
  for (const auto& c : R.checks) {
    if (c.informational) {
      info += c.name + (c.pass ? " clean" : " with " + std::to_string(c.witnesses.size()) + " witnesses");
      continue;
    }
    ++counted;
    if (!c.pass || !c.witnesses.empty()) bad += " " + c.name;
  }
  v.pass = bad.empty();
  v.detail = std::to_string(counted) + " checks at delta 1e-2" + (bad.empty() ? ", all clean" : ", failing:" + bad) +
             "; informational: " + info;
  return v;
}

// ---- 8: Dirichlet

Verdict criterion8() {
  Verdict v;
  ProblemModel m = canonical();
  double R1 = 3.0, R2 = 1.0;
  DirichletResult a = solve_dirichlet(m, R1, 6.0, 1e-10), b = solve_dirichlet(m, R2, 6.0, 1e-10);
  auto check = [&](const DirichletResult& d, double target) {
    const auto& T = d.trajectory.terminal();
    double u_target = std::abs(T.u + T.du * (target - d.R));
    bool inside = true;
    for (const auto& nd : d.trajectory.nodes())
      if (nd.r < d.R && !(nd.u > 0.0)) inside = false;
    return std::make_pair(u_target, inside);
  };
  auto [ua, ia] = check(a, R1);
  auto [ub, ib] = check(b, R2);
  v.pass = a.alpha < b.alpha && ua < 1e-8 && ub < 1e-8 && ia && ib;
  v.detail = "alpha(" + g(R1) + ")=" + format_double(a.alpha) + " < alpha(" + g(R2) + ")=" + format_double(b.alpha) +
             ", |u(R)| " + g(ua) + " and " + g(ub) + (ia && ib ? ", positive inside" : ", sign change inside");
  return v;
}

// ---- 9: transform

Verdict criterion9() {
  Verdict v;
  auto nl = Nonlinearity::power_diff(3.0, 0.5);
  double worst_u = 0.0, worst_map = 0.0;
  for (double N : {3.0, 4.0, 5.0}) {
    auto T = transform_ab_to_K(GeneralWeightPair::matukuma_ab(3.0, 1.0), 2.0, N, nl);
    for (double r : log_grid(1e-8, 1e8, 161)) {
      worst_map = std::max(worst_map, std::abs(T.inverse(T.forward(r)) / r - 1.0));
      double t = T.forward(r);
      worst_map = std::max(worst_map, std::abs(T.forward(T.inverse(t)) / t - 1.0));
    }
    ProblemModel direct(Parameters(2.0, 3.0), Weight::matukuma(1.0), nl);
    for (double alpha : {2.0, 3.0, 6.0}) {
      Trajectory d = integrate_ivp(direct, alpha), t = integrate_ivp(T.model(), alpha);
      for (const auto& nd : d.nodes()) {
        if (nd.u <= 1e-3 || T.forward(nd.r) > t.R()) continue;
        worst_u = std::max(worst_u, std::abs(T.u_pulled(t, nd.r) / nd.u - 1.0));
      }
    }
  }
  v.pass = worst_u < 1e-6 && worst_map < 1e-10;
  v.detail = "N in {3, 4, 5}: worst solution mismatch " + g(worst_u) + ", worst map round trip " + g(worst_map);
  return v;
}

// ---- 10: determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict criterion10() {
  Verdict v;
  fs::path dir = fs::temp_directory_path() / "plshoot_acceptance";
  fs::create_directories(dir);
  fs::path cfg = dir / "model.json";
  std::ofstream(cfg) << model_to_json(canonical()).dump(2);
  auto run_all = [&](const std::string& threads, const std::string& tag) {
    std::vector<std::vector<std::string>> cmds = {
        {"plshoot", "check", "--config", cfg.string(), "--out", (dir / (tag + "check.json")).string()},
        {"plshoot", "integrate", "--config", cfg.string(), "--alpha", "5", "--out", (dir / (tag + "traj.csv")).string()},
        {"plshoot", "classify", "--config", cfg.string(), "--alpha-range", "1.01:50:64", "--quiet", "--threads", threads, "--out",
         (dir / (tag + "sweep.csv")).string()},
        {"plshoot", "variational", "--config", cfg.string(), "--alpha", "5", "--out", (dir / (tag + "var.csv")).string(),
         "--report", (dir / (tag + "var.json")).string()},
        {"plshoot", "verify", "--config", cfg.string(), "--suite", "all", "--threads", threads, "--report",
         (dir / (tag + "report.json")).string()}};
    int codes = 0;
    for (auto& c : cmds) codes |= cli::run(c);
    return codes;
  };
  int c1 = run_all("1", "a_"), c4 = run_all("4", "b_"), c1b = run_all("1", "c_");
  std::vector<std::string> files = {"check.json", "traj.csv", "traj.csv.json", "sweep.csv", "var.csv", "var.json",
                                    "report.json"};
  int differ = 0;
  for (const auto& f : files) {
    std::string a = slurp(dir / ("a_" + f)), b = slurp(dir / ("b_" + f)), c = slurp(dir / ("c_" + f));
    if (a.empty() || a != b || a != c) ++differ;
  }
  v.pass = differ == 0 && c1 == 0 && c4 == 0 && c1b == 0;
  v.detail = std::to_string(files.size()) + " output files over 3 runs (threads 1, 4, 1): " + std::to_string(differ) +
             " differ; exit codes " + std::to_string(c1) + "/" + std::to_string(c4) + "/" + std::to_string(c1b);
  return v;
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* title, const std::function<Verdict()>& f) {
    auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = f();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("threw: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!v.pass) ++failed;
    std::printf("criterion %d %s: %s (%s) [%.1fs]\n", id, title, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
  };
  BracketResult bracket;
  bool have_bracket = false;
  report(1, "hypothesis certification", criterion1);
  report(2, "integrator self-convergence", criterion2);
  report(3, "integral-form residual", criterion3);
  report(4, "energy monotonicity and signs", criterion4);
  report(5, "ground-state bracketing", [&] {
    Verdict v = criterion5(bracket);
    have_bracket = bracket.alpha_hi > 0.0;
    return v;
  });
  report(6, "variational correctness", criterion6);
  report(7, "monotone separation suite", [&] {
    if (!have_bracket) return Verdict{false, "no bracket from criterion 5"};
    return criterion7(bracket);
  });
  report(8, "Dirichlet inversion", criterion8);
  report(9, "transform round trip", criterion9);
  report(10, "determinism", criterion10);
  std::printf("%d of 10 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
