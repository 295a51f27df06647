#include "plshoot/variational.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/tools/roots.hpp>

#include "plshoot/config.hpp"
#include "plshoot/error.hpp"

namespace plshoot {

namespace {

constexpr int kPicardSweeps = 3;
constexpr double kPicardPhiTol = 1e-13;
constexpr double kPicardFluxTol = 1e-10;
constexpr int kMaxRebase = 5;

double root_in(const ode::DenseSegment<4>& seg, std::size_t i, double target) {
  auto f = [&](double x) { return seg.component(i, x) - target; };
  double a = seg.x0, b = seg.x1();
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0 || (fa > 0) == (fb > 0)) return b;
  boost::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(), iters);
  return 0.5 * (r.first + r.second);
}

// f' with the right derivative at u0 for families not smooth below it
double dfv(const Nonlinearity& nl, double u) {
  if (u < nl.u0() && !nl.smooth_below_u0()) return nl.df(nl.u0());
  return nl.df(std::abs(u));
}

struct Local {
  double p, n;
  // dphi/dx per unit flux
  double coupling(double r, double m) const {
    double rn1 = std::pow(r, n - 1.0);
    return r / ((p - 1.0) * rn1) * std::pow(std::abs(m) / rn1, (2.0 - p) / (p - 1.0));
  }
};

VariationalNode make_node(const ProblemModel& model, double r, double m, double phi, double flux) {
  const double p = model.params.p, n = model.params.n;
  if (r <= 0.0) return {0.0, 1.0, 0.0, 0.0, 0.0};
  Local L{p, n};
  double dphi = L.coupling(r, m) * flux / r;
  double q = std::pow(r, n - 1.0) * std::pow(model.weight(r).K, (p - 1.0) / p);
  return {r, phi, dphi, flux, flux / q};
}

}  // namespace

VariationalState solve_variational(const ProblemModel& model, const Trajectory& traj) {
  const double p = model.params.p, n = model.params.n;
  const double u0 = model.u0();
  const Nonlinearity& nl = model.nonlinearity;
  if (!traj.r0())
    throw DomainError("variational solve needs a shot that descends through u0",
                      {{"alpha", traj.alpha()}, {"stop", to_string(traj.stop_event())}});

  VariationalState V;
  V.p_ = p;
  V.n_ = n;
  V.model_ = &model;
  V.base_ = traj;
  Local L{p, n};

  for (int rebase = 0;; ++rebase) {
    if (!V.base_.startup() || !V.base_.r0())
      throw DomainError("variational solve needs a shot that descends through u0", {{"alpha", traj.alpha()}});
    const StartupProfile& sp = *V.base_.startup();
    const double alpha = sp.alpha;

    // Picard sweeps on the startup interval, all integrated together
    auto chain_rhs = [&](double x, const ode::State<6>& y) {
      double r = std::exp(x);
      ode::State<4> st = sp.state(r);
      double G = std::exp(n * x) * model.weight(r).K * dfv(nl, alpha - st[3]);
      double c = L.coupling(r, st[2]);
      return ode::State<6>{G, -c * y[0], G * y[1], -c * y[2], G * y[3], -c * y[4]};
    };
    double x0 = std::log(sp.s0), x1 = std::log(sp.r1);
    ode::State<6> y0{};
    {
      double G = std::exp(n * x0) * model.weight(sp.s0).K * dfv(nl, alpha - sp.at_s0[3]);
      double c = L.coupling(sp.s0, sp.at_s0[2]);
      double prev = 1.0;
      for (int k = 0; k < kPicardSweeps; ++k) {
        y0[2 * k] = G * prev / sp.kappa_W;
        y0[2 * k + 1] = 1.0 - c * y0[2 * k] / sp.kappa_U;
        prev = y0[2 * k + 1];
      }
    }
    ode::StepControl cctl;
    cctl.rel_tol = 1e-13;
    cctl.abs_tol = 1e-300;
    V.chain_.clear();
    ode::State<6> yr1 = y0;
    auto crun = ode::dopri5<6>(chain_rhs, x0, y0, x1, cctl, [&](const ode::DenseSegment<6>& seg, const ode::State<6>& y) {
      V.chain_.push_back(seg);
      yr1 = y;
      return false;
    });
    bool ok = crun.outcome == ode::Outcome::reached_end;
    double dphi_pic = std::abs(yr1[5] - yr1[3]);
    double dflux_pic = std::abs(yr1[4] - yr1[2]);
    ok = ok && dphi_pic <= kPicardPhiTol && dflux_pic <= kPicardFluxTol * std::abs(yr1[4]);
    if (!ok) {
      if (rebase >= kMaxRebase)
        throw DomainError("startup fixed point for the variational system did not converge",
                          {{"alpha", alpha}, {"change", dphi_pic}});
      IntegratorControls c = V.base_.controls();
      c.startup_radius /= 10.0;
      V.base_ = integrate_ivp(model, alpha, c);
      ++V.shrinks_;
      continue;
    }
    V.startup_change_ = dphi_pic;
    V.chain_s0_ = y0;
    V.s0_ = sp.s0;
    V.r1_ = sp.r1;
    V.kappa_W_ = sp.kappa_W;
    V.kappa_U_ = sp.kappa_U;

    const auto& BN = V.base_.nodes();
    V.nodes_.clear();
    V.segments_.clear();
    V.nodes_.push_back({0.0, 1.0, 0.0, 0.0, 0.0});
    V.nodes_.push_back(make_node(model, BN[1].r, BN[1].m, yr1[5], -yr1[4]));

    auto rhs = [&](double x, const ode::State<4>& y) {
      ode::State<2> b = detail::radial_rhs(model, x, y[0], y[1]);
      double r = std::exp(x);
      double G = std::exp(n * x) * model.weight(r).K * dfv(nl, y[0]);
      return ode::State<4>{b[0], b[1], L.coupling(r, y[1]) * y[3], -G * y[2]};
    };
    bool hit = false;
    auto on_step = [&](const ode::DenseSegment<4>& seg, const ode::State<4>& y1) {
      V.segments_.push_back(seg);
      if (y1[0] <= u0) {
        double xr = root_in(seg, 0, u0);
        double rr = std::exp(xr);
        ode::State<4> yr = seg(xr);
        V.nodes_.push_back(make_node(model, rr, yr[1], yr[2], yr[3]));
        hit = true;
        return true;
      }
      V.nodes_.push_back(make_node(model, std::exp(seg.x1()), y1[1], y1[2], y1[3]));
      return false;
    };
    ode::State<4> ys{BN[1].u, BN[1].m, yr1[5], -yr1[4]};
    auto res = ode::dopri5<4>(rhs, std::log(BN[1].r), ys, std::log(V.base_.controls().r_max),
                              detail::step_control(V.base_.controls()), on_step);
    if (!hit)
      throw DomainError("augmented shot did not reach u0", {{"alpha", alpha}, {"failure", res.failure}});

    // compare radii with the base run up to r0
    V.aligned_ = true;
    for (std::size_t i = 0; i + 1 < V.nodes_.size(); ++i)
      if (i >= BN.size() || V.nodes_[i].r != BN[i].r) {
        V.aligned_ = false;
        break;
      }
    if (V.aligned_ && std::abs(V.r0() - *V.base_.r0()) > 1e-12 * V.r0()) V.aligned_ = false;
    return V;
  }
}

VariationalNode VariationalState::at(double r) const {
  const ProblemModel& model = *model_;
  if (r <= 0.0) return nodes_.front();
  if (r > r0() * (1.0 + 1e-12)) throw DomainError("variational solution is only defined up to r0", {{"r", r}});
  r = std::min(r, r0());
  if (r <= r1_) {
    const StartupProfile& sp = *base_.startup();
    double m = sp.m(r);
    if (r <= s0_) {
      double t = std::log(r / s0_);
      double Psi = chain_s0_[4] * std::exp(kappa_W_ * t);
      double phi = 1.0 - (1.0 - chain_s0_[5]) * std::exp(kappa_U_ * t);
      return make_node(model, r, m, phi, -Psi);
    }
    double x = std::log(r);
    auto it = std::partition_point(chain_.begin(), chain_.end(),
                                   [x](const ode::DenseSegment<6>& s) { return s.x1() < x; });
    if (it == chain_.end()) --it;
    return make_node(model, r, m, it->component(5, x), -it->component(4, x));
  }
  double x = std::log(r);
  auto it = std::partition_point(segments_.begin(), segments_.end(),
                                 [x](const ode::DenseSegment<4>& s) { return s.x1() < x; });
  if (it == segments_.end()) return nodes_.back();
  ode::State<4> y = (*it)(x);
  return make_node(model, r, y[1], y[2], y[3]);
}

AlphaDerivatives alpha_derivatives(const ProblemModel& model, double alpha, const IntegratorControls& controls) {
  const double p = model.params.p, n = model.params.n;
  Trajectory traj = integrate_ivp(model, alpha, controls);
  VariationalState V = solve_variational(model, traj);
  const VariationalNode& e = V.at_r0();
  double r0 = e.r;
  double du = *V.base().du_r0();
  double c = (n - p) / (p - 1.0);
  AlphaDerivatives D{};
  D.alpha = alpha;
  D.r0 = r0;
  D.du_r0 = du;
  D.phi_r0 = e.phi;
  D.dphi_r0 = e.dphi;
  D.dr0_dalpha = -e.phi / du;
  D.d_r0du_dalpha = c * e.phi + r0 * e.dphi;
  D.identity_lhs = std::pow(r0, c - 1.0) * D.d_r0du_dalpha;
  double h = 1e-3 * r0;
  auto g = [&](double r) { return std::pow(r, c) * V.phi_at(r); };
  D.identity_rhs = (3.0 * g(r0) - 4.0 * g(r0 - h) + g(r0 - 2.0 * h)) / (2.0 * h);
  return D;
}

FiniteDifferenceCheck fd_check(const ProblemModel& model, double alpha, double h, const IntegratorControls& controls) {
  if (!(h > 0.0) || !(alpha - h > model.u0()))
    throw DomainError("finite-difference step must be positive and keep alpha - h above u0",
                      {{"alpha", alpha}, {"h", h}});
  Trajectory base = integrate_ivp(model, alpha, controls);
  VariationalState V = solve_variational(model, base);
  Trajectory up = integrate_ivp(model, alpha + h, controls);
  Trajectory dn = integrate_ivp(model, alpha - h, controls);
  if (!up.r0() || !dn.r0())
    throw DomainError("finite-difference shots do not both reach u0", {{"alpha", alpha}, {"h", h}});
  FiniteDifferenceCheck C{};
  C.h = h;
  double lim = 0.9 * V.r0();
  double worst = 0.0, scale = 0.0;
  for (const auto& nd : V.nodes()) {
    if (nd.r > lim) break;
    double fd = (up.u_at(nd.r) - dn.u_at(nd.r)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - nd.phi));
    scale = std::max(scale, std::abs(nd.phi));
    ++C.points;
  }
  C.phi_rel_err = scale > 0.0 ? worst / scale : worst;
  C.dr0_fd = (*up.r0() - *dn.r0()) / (2.0 * h);
  C.dr0_var = -V.at_r0().phi / *V.base().du_r0();
  C.dr0_rel_err = std::abs(C.dr0_var - C.dr0_fd) / std::max(std::abs(C.dr0_fd), 1e-300);
  return C;
}

double eval_G(const ProblemModel& model, const InverseProfile& ref, double s) {
  const double p = model.params.p, n = model.params.n;
  const double u0 = model.u0();
  double top = ref.s_max();
  if (!(s > u0 && s < top)) throw DomainError("G is defined for s strictly between u0 and alpha", {{"s", s}});
  double t = ref.t(s);
  if (!(t > 0.0)) throw DomainError("inverse profile returned t = 0 inside (u0, alpha)", {{"s", s}});
  double slope = model.weight(t).slope;
  const Nonlinearity& nl = model.nonlinearity;
  return p * (n + slope) * nl.F0(s) / (s * nl.f(s)) - (n - p);
}

double eval_G(const ProblemModel& model, const Trajectory& ref, double s) {
  return eval_G(model, InverseProfile(ref), s);
}

KwongReport kwong_check(const ProblemModel& model, const Trajectory& traj) {
  const double p = model.params.p, n = model.params.n;
  if (!traj.r0()) throw DomainError("Kwong check needs a shot that reaches u0", {{"alpha", traj.alpha()}});
  double r0 = *traj.r0();
  KwongReport K;
  double prev = 0.0;
  bool first = true;
  for (const auto& nd : traj.nodes()) {
    if (nd.r <= 0.0) continue;
    if (nd.r >= r0) break;
    double q = nd.r * nd.du / nd.u;
    ++K.points;
    if (!first && !(q < prev) && K.decreasing) {
      K.decreasing = false;
      K.witness = Witness{nd.r, "r u'/u = " + format_double(q) + " not below previous " + format_double(prev)};
    }
    prev = q;
    first = false;
  }
  K.endpoint = (n - p) / (p - 1.0) * model.u0() + r0 * *traj.du_r0();
  K.endpoint_negative = K.endpoint < 0.0;
  return K;
}

}  // namespace plshoot
