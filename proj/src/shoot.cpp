#include "plshoot/shoot.hpp"

#include <algorithm>
#include <limits>

#include <boost/math/tools/roots.hpp>

#include "plshoot/error.hpp"
#include "plshoot/quadrature.hpp"

namespace plshoot {

namespace {

constexpr double kStartupSpan = 25.0;  // decades of e below r1 covered by the startup solve
constexpr double kStartupDepth = 1e-6;

template <class F>
double bracketed_root(F&& f, double a, double b) {
  double fa = f(a), fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0 || (fa > 0) == (fb > 0)) return b;
  boost::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(), iters);
  return 0.5 * (r.first + r.second);
}

template <std::size_t N>
double segment_root(const ode::DenseSegment<N>& seg, std::size_t i, double target, double xb) {
  return bracketed_root([&](double x) { return seg.component(i, x) - target; }, seg.x0, xb);
}

double du_from_m(double r, double m, double p, double n) {
  if (r == 0.0) return 0.0;
  return phi_inv(m / std::exp((n - 1.0) * std::log(r)), p);
}

std::shared_ptr<StartupProfile> build_startup(const ProblemModel& model, double alpha, double r1) {
  const double p = model.params.p, n = model.params.n;
  const double q = 1.0 / (p - 1.0);
  const Nonlinearity& nl = model.nonlinearity;
  const double fa = nl.f(alpha);

  auto flux_rate = [&](double x) { return std::exp(n * x) * model.weight(std::exp(x)).K; };
  auto depth_rate = [&](double x, double M) {
    if (!(M > 0.0)) return 0.0;
    return std::exp(x + (std::log(M) - (n - 1.0) * x) * q);
  };
  auto rhs = [&](double x, const ode::State<4>& y) {
    double G = flux_rate(x);
    return ode::State<4>{G, depth_rate(x, fa * y[0]), G * nl.f_odd(alpha - y[1]), depth_rate(x, y[2])};
  };

  auto prof = std::make_shared<StartupProfile>();
  prof->alpha = alpha;
  prof->r1 = r1;
  double x1 = std::log(r1), x0 = x1 - kStartupSpan;
  prof->s0 = std::exp(x0);

  // power-law behaviour below s0 seeds the quadratures
  WeightSample w0 = model.weight(prof->s0);
  prof->kappa_W = n + w0.slope;
  prof->kappa_U = 1.0 + (prof->kappa_W - (n - 1.0)) * q;
  if (!(prof->kappa_W > 0.0) || !(prof->kappa_U > 0.0))
    throw DomainError("weight too singular at the origin for the startup quadrature",
                      {{"r", prof->s0}, {"slope", w0.slope}});
  ode::State<4> y0;
  y0[0] = flux_rate(x0) / prof->kappa_W;
  y0[1] = depth_rate(x0, fa * y0[0]) / prof->kappa_U;
  y0[2] = y0[0] * nl.f_odd(alpha - y0[1]);
  y0[3] = depth_rate(x0, y0[2]) / prof->kappa_U;
  prof->at_s0 = y0;

  ode::StepControl ctl;
  ctl.rel_tol = 1e-13;
  ctl.abs_tol = 1e-300;
  ctl.max_steps = 200000;
  auto run = ode::dopri5<4>(rhs, x0, y0, x1, ctl, [&](const ode::DenseSegment<4>& seg, const ode::State<4>& y) {
    prof->segments.push_back(seg);
    prof->at_r1 = y;
    return false;
  });
  if (run.outcome != ode::Outcome::reached_end)
    throw DomainError("startup quadrature failed: " + run.failure, {{"alpha", alpha}, {"r1", r1}});
  return prof;
}

}  // namespace

void IntegratorControls::validate() const {
  if (!(abs_tol > 0.0 && abs_tol <= rel_tol && rel_tol < 1.0))
    throw DomainError("integrator tolerances need 0 < abs_tol <= rel_tol < 1",
                      {{"rel_tol", rel_tol}, {"abs_tol", abs_tol}});
  if (!(startup_radius > 0.0 && r_max > startup_radius))
    throw DomainError("integrator radii need r_max > startup_radius > 0",
                      {{"r_max", r_max}, {"startup_radius", startup_radius}});
  if (max_steps == 0) throw DomainError("max_steps must be positive");
}

IntegratorControls IntegratorControls::tightened(double factor) const {
  IntegratorControls c = *this;
  c.rel_tol /= factor;
  c.abs_tol /= factor;
  return c;
}

std::string to_string(StopEvent e) {
  switch (e) {
    case StopEvent::u_hit_zero: return "u_hit_zero";
    case StopEvent::du_hit_zero: return "du_hit_zero";
    case StopEvent::reached_r_max: return "reached_r_max";
    case StopEvent::step_failure: return "step_failure";
  }
  return "step_failure";
}

ode::State<4> StartupProfile::state(double r) const {
  if (r <= 0.0) return {0.0, 0.0, 0.0, 0.0};
  if (r <= s0) {
    double lw = kappa_W * std::log(r / s0), lu = kappa_U * std::log(r / s0);
    return {at_s0[0] * std::exp(lw), at_s0[1] * std::exp(lu), at_s0[2] * std::exp(lw), at_s0[3] * std::exp(lu)};
  }
  if (r >= r1) return at_r1;
  double x = std::log(r);
  auto it = std::partition_point(segments.begin(), segments.end(),
                                 [x](const ode::DenseSegment<4>& s) { return s.x1() < x; });
  if (it == segments.end()) return at_r1;
  return (*it)(x);
}

StartupResult origin_startup(const ProblemModel& model, double alpha, double r1) {
  const double u0 = model.u0();
  if (!(alpha > u0)) throw DomainError("startup needs alpha > u0", {{"alpha", alpha}, {"u0", u0}});
  if (!(r1 > 0.0)) throw DomainError("startup radius must be positive", {{"r1", r1}});
  // u(r1) must also stay above u0 so that r0 lies beyond the startup region
  double allowed = std::min(kStartupDepth * alpha, 0.5 * (alpha - u0));
  for (int shrink = 0; shrink <= 10; ++shrink, r1 /= 10.0) {
    auto prof = build_startup(model, alpha, r1);
    const auto& y = prof->at_r1;
    if (!std::isfinite(y[3]) || !(y[3] <= allowed) || !std::isfinite(y[2])) continue;
    double fa = model.nonlinearity.f(alpha);
    return StartupResult{r1, alpha - y[3], -y[2], alpha - y[1], -fa * y[0], shrink, prof};
  }
  throw DomainError("startup validation failed after 10 shrinks", {{"alpha", alpha}, {"r1", r1 * 10.0}});
}

namespace detail {

ode::StepControl step_control(const IntegratorControls& c) {
  ode::StepControl s;
  s.rel_tol = c.rel_tol;
  s.abs_tol = c.abs_tol;
  s.controlled = 2;
  s.max_steps = c.max_steps;
  return s;
}

}  // namespace detail

Trajectory integrate_ivp(const ProblemModel& model, double alpha, const IntegratorControls& controls) {
  controls.validate();
  const double u0 = model.u0();
  const double p = model.params.p, n = model.params.n;
  if (!(alpha > u0))
    throw DomainError("alpha <= u0: the energy starts at F(alpha) < 0 and stays negative, so no crossing exists",
                      {{"alpha", alpha}, {"u0", u0}});

  Trajectory T;
  T.alpha_ = alpha;
  T.p_ = p;
  T.n_ = n;
  T.controls_ = controls;
  T.nodes_.push_back({0.0, alpha, 0.0, 0.0});

  StartupResult st;
  try {
    st = origin_startup(model, alpha, controls.startup_radius);
  } catch (const DomainError& e) {
    T.stop_ = StopEvent::step_failure;
    T.failure_ = e.what();
    return T;
  }
  T.startup_ = st.profile;
  T.nodes_.push_back({st.r1, st.u, du_from_m(st.r1, st.m, p, n), st.m});

  auto rhs = [&model](double x, const ode::State<2>& y) { return detail::radial_rhs(model, x, y[0], y[1]); };
  auto on_step = [&](const ode::DenseSegment<2>& seg, const ode::State<2>& y1) {
    T.segments_.push_back(seg);
    const ode::State<2>& y0 = seg.rc[0];
    double xb = seg.x1();
    if (!T.r0_ && y0[0] > u0 && y1[0] <= u0) {
      double xr = segment_root(seg, 0, u0, xb);
      double rr = std::exp(xr);
      T.r0_ = rr;
      T.du_r0_ = du_from_m(rr, seg.component(1, xr), p, n);
    }
    double x_ev = std::numeric_limits<double>::infinity();
    StopEvent ev = StopEvent::step_failure;
    if (y1[0] <= 0.0) {
      x_ev = segment_root(seg, 0, 0.0, xb);
      ev = StopEvent::u_hit_zero;
    }
    if (y1[1] >= 0.0 && std::min(y0[0], y1[0]) < u0) {
      double xm = segment_root(seg, 1, 0.0, xb);
      if (xm < x_ev && seg.component(0, xm) < u0) {
        x_ev = xm;
        ev = StopEvent::du_hit_zero;
      }
    }
    if (std::isfinite(x_ev)) {
      double r = std::exp(x_ev);
      double u = seg.component(0, x_ev), m = seg.component(1, x_ev);
      if (ev == StopEvent::u_hit_zero) {
        u = 0.0;
        // f is not smooth at u = 0 and the step interpolant misses it; integrate the flux directly
        auto rate = [&](double x) {
          return std::exp(n * x) * model.weight(std::exp(x)).K * model.nonlinearity.f_odd(seg.component(0, x));
        };
        if (x_ev > seg.x0) m = y0[1] - quad::integrate_singular(rate, seg.x0, x_ev, 1e-3 * controls.rel_tol);
      }
      if (ev == StopEvent::du_hit_zero) m = 0.0;
      T.nodes_.push_back({r, u, du_from_m(r, m, p, n), m});
      T.stop_ = ev;
      return true;
    }
    double r = std::exp(xb);
    T.nodes_.push_back({r, y1[0], du_from_m(r, y1[1], p, n), y1[1]});
    return false;
  };

  auto res = ode::dopri5<2>(rhs, std::log(st.r1), ode::State<2>{st.u, st.m}, std::log(controls.r_max),
                            detail::step_control(controls), on_step);
  T.steps_ = res.steps;
  if (res.outcome == ode::Outcome::reached_end) {
    T.stop_ = StopEvent::reached_r_max;
    T.nodes_.back().r = controls.r_max;
  } else if (res.outcome == ode::Outcome::step_failure) {
    T.stop_ = StopEvent::step_failure;
    T.failure_ = res.failure;
  }
  return T;
}

TrajectoryNode Trajectory::at(double r) const {
  if (r <= 0.0) return nodes_.front();
  if (startup_ && r <= startup_->r1) {
    double u = startup_->u(r), m = startup_->m(r);
    return {r, u, du_from_m(r, m, p_, n_), m};
  }
  double R = nodes_.back().r;
  if (r > R * (1.0 + 1e-12)) throw DomainError("radius beyond the end of the trajectory", {{"r", r}, {"R", R}});
  if (segments_.empty()) return nodes_.back();
  r = std::min(r, R);
  auto it = std::partition_point(nodes_.begin() + 1, nodes_.end(), [r](const TrajectoryNode& nd) { return nd.r < r; });
  std::size_t i = std::size_t(it - nodes_.begin());
  if (i < 2) i = 2;
  if (i >= nodes_.size()) i = nodes_.size() - 1;
  if (nodes_[i].r == r) return nodes_[i];
  const auto& seg = segments_[i - 2];
  double x = std::log(r);
  double u = seg.component(0, x), m = seg.component(1, x);
  return {r, u, du_from_m(r, m, p_, n_), m};
}

double Trajectory::u_at(double r) const { return at(r).u; }
double Trajectory::m_at(double r) const { return at(r).m; }
double Trajectory::du_at(double r) const { return at(r).du; }

InverseProfile::InverseProfile(const Trajectory& traj) : traj_(&traj) {
  const auto& N = traj.nodes();
  for (std::size_t i = 1; i < N.size(); ++i)
    if (!(N[i].u < N[i - 1].u))
      throw DomainError("trajectory is not strictly decreasing; cannot invert", {{"r", N[i].r}, {"u", N[i].u}});
}

double InverseProfile::t(double s) const {
  const auto& N = traj_->nodes();
  if (s >= N.front().u) return 0.0;
  if (s <= N.back().u) return N.back().r;
  auto it = std::partition_point(N.begin(), N.end(), [s](const TrajectoryNode& nd) { return nd.u > s; });
  std::size_t i = std::size_t(it - N.begin());
  if (N[i].u == s) return N[i].r;
  if (i == 1) {
    const StartupProfile& sp = *traj_->startup();
    double depth = sp.alpha - s;
    if (depth <= sp.at_s0[3]) return sp.s0 * std::pow(depth / sp.at_s0[3], 1.0 / sp.kappa_U);
    double x = bracketed_root([&](double xx) { return sp.state(std::exp(xx))[3] - depth; }, std::log(sp.s0),
                              std::log(sp.r1));
    return std::exp(x);
  }
  const auto& seg = traj_->segments()[i - 2];
  double x = bracketed_root([&](double xx) { return seg.component(0, xx) - s; }, seg.x0, std::log(N[i].r));
  return std::exp(x);
}

double InverseProfile::dt_ds(double s) const { return 1.0 / traj_->du_at(t(s)); }

InverseProfile invert_profile(const Trajectory& traj) { return InverseProfile(traj); }

EnergyValue energy_at_node(const ProblemModel& model, const TrajectoryNode& nd) {
  const double p = model.params.p, n = model.params.n;
  if (nd.r <= 0.0) return {model.nonlinearity.F(nd.u), 0.0};
  WeightSample w = model.weight(nd.r);
  double kin = std::pow(std::abs(nd.du), p);
  double pc = model.params.p_conj();
  double E = kin / (pc * w.K) + model.nonlinearity.F(nd.u);
  double dE = -(kin / (pc * nd.r * w.K)) * ((n - 1.0) * p / (p - 1.0) + w.slope);
  return {E, dE};
}

EnergyValue energy(const ProblemModel& model, const Trajectory& traj, double r) {
  return energy_at_node(model, traj.at(r));
}

CapitalI::CapitalI(const ProblemModel& model, const Trajectory& ref) : model_(&model), ref_(&ref), inv_(ref) {
  const auto& N = ref.nodes();
  tail_.assign(N.size(), 0.0);
  for (std::size_t j = N.size() - 1; j-- > 1;)
    tail_[j] = tail_[j + 1] + segment_integral(j - 1, std::log(N[j].r), std::log(N[j + 1].r));
}

double CapitalI::segment_integral(std::size_t k, double xa, double xb) const {
  const double p = model_->params.p, n = model_->params.n;
  const auto& seg = ref_->segments()[k];
  auto g = [&](double x) {
    double r = std::exp(x);
    double u = seg.component(0, x), m = seg.component(1, x);
    double du = phi_inv(m / std::exp((n - 1.0) * x), p);
    return std::exp((p + 1.0) * x) * model_->weight(r).K * model_->nonlinearity.f_odd(u) * std::abs(du);
  };
  return quad::gauss10(g, xa, xb);
}

double CapitalI::Fbar(double s) const {
  const auto& N = ref_->nodes();
  double t = inv_.t(s);
  if (t <= 0.0) t = std::min(N[1].r, 1e-300);
  if (t < N[1].r) {
    const double p = model_->params.p;
    auto g = [&](double x) {
      double r = std::exp(x);
      TrajectoryNode nd = ref_->at(r);
      return std::exp((p + 1.0) * x) * model_->weight(r).K * model_->nonlinearity.f_odd(nd.u) * std::abs(nd.du);
    };
    double xa = std::max(std::log(t), std::log(ref_->startup()->s0));
    return quad::integrate(g, xa, std::log(N[1].r), 1e-12) + tail_[1];
  }
  auto it = std::partition_point(N.begin() + 1, N.end(), [t](const TrajectoryNode& nd) { return nd.r < t; });
  std::size_t i = std::size_t(it - N.begin());
  if (i >= N.size()) return 0.0;
  if (N[i].r == t) return tail_[i];
  return segment_integral(i - 2, std::log(t), std::log(N[i].r)) + tail_[i];
}

double CapitalI::I(double s, const Trajectory& traj) const {
  if (s < traj.terminal().u)
    throw DomainError("shot does not reach the requested level", {{"s", s}, {"u_R", traj.terminal().u}});
  InverseProfile inv(traj);
  double t = inv.t(s);
  double du = traj.du_at(t);
  const double p = model_->params.p;
  return std::pow(t * std::abs(du), p) / model_->params.p_conj() + Fbar(s);
}

double CapitalI::W(double s, const Trajectory& traj) const {
  double v = I(s, traj);
  if (v < 0.0) throw DomainError("W requested where I < 0", {{"s", s}, {"I", v}});
  return std::pow(v, 1.0 / model_->params.p);
}

CapitalIValue capital_I(const ProblemModel& model, const Trajectory& ref, const Trajectory& traj, double s) {
  CapitalI ci(model, ref);
  double I = ci.I(s, traj);
  std::optional<double> W;
  if (I >= 0.0) W = std::pow(I, 1.0 / model.params.p);
  return {ci.Fbar(s), I, W};
}

}  // namespace plshoot
