#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "plshoot/dopri5.hpp"
#include "plshoot/model.hpp"

namespace plshoot {

struct IntegratorControls {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double r_max = 1e6;
  double startup_radius = 1e-4;
  std::size_t max_steps = 200000;

  void validate() const;
  // both tolerances divided by factor
  IntegratorControls tightened(double factor) const;
};

enum class StopEvent { u_hit_zero, du_hit_zero, reached_r_max, step_failure };
std::string to_string(StopEvent e);

struct TrajectoryNode {
  double r, u, du, m;
};

// sign(z)|z|^{1/(p-1)}, the inverse of phi_p
inline double phi_inv(double z, double p) {
  double a = std::pow(std::abs(z), 1.0 / (p - 1.0));
  return z < 0 ? -a : a;
}

// Solution on [0, r1] in x = log r. Components: W = int s^{n-1}K, the frozen depth U0 = alpha - u,
// the refined flux M1 = -m and the refined depth U1 = alpha - u.
struct StartupProfile {
  double alpha = 0.0;
  double r1 = 0.0;
  double s0 = 0.0;
  double kappa_W = 0.0;  // power-law exponents below s0
  double kappa_U = 0.0;
  std::vector<ode::DenseSegment<4>> segments;
  ode::State<4> at_s0{};
  ode::State<4> at_r1{};

  ode::State<4> state(double r) const;
  double u(double r) const { return alpha - state(r)[3]; }
  double m(double r) const { return -state(r)[2]; }
};

struct StartupResult {
  double r1;
  double u;
  double m;
  double u_frozen;  // before the fixed-point refinement
  double m_frozen;
  int shrinks;
  std::shared_ptr<const StartupProfile> profile;
};

// Frozen-height quadrature plus one refinement on [0, r1]; r1 shrinks by 10 (at most 10 times)
// until alpha - u(r1) <= 1e-6 alpha. Throws DomainError when that never happens.
StartupResult origin_startup(const ProblemModel& model, double alpha, double r1);

class Trajectory {
 public:
  double alpha() const { return alpha_; }
  StopEvent stop_event() const { return stop_; }
  const std::string& failure() const { return failure_; }
  const std::vector<TrajectoryNode>& nodes() const { return nodes_; }
  const TrajectoryNode& terminal() const { return nodes_.back(); }
  double R() const { return nodes_.back().r; }
  double startup_radius() const { return startup_ ? startup_->r1 : 0.0; }
  const StartupProfile* startup() const { return startup_.get(); }
  const IntegratorControls& controls() const { return controls_; }
  double p() const { return p_; }
  double n() const { return n_; }
  std::size_t steps() const { return steps_; }

  std::optional<double> r0() const { return r0_; }
  std::optional<double> du_r0() const { return du_r0_; }
  // tail diagnostics, meaningful for reached_r_max
  double tail_r_du() const { return R() * std::abs(terminal().du); }

  // dense output; r in [0, R]
  double u_at(double r) const;
  double m_at(double r) const;
  double du_at(double r) const;
  TrajectoryNode at(double r) const;

  // main-phase segments in x = log r; segment k spans nodes k+1 .. k+2
  const std::vector<ode::DenseSegment<2>>& segments() const { return segments_; }

 private:
  friend Trajectory integrate_ivp(const ProblemModel&, double, const IntegratorControls&);

  double alpha_ = 0.0, p_ = 2.0, n_ = 3.0;
  IntegratorControls controls_;
  StopEvent stop_ = StopEvent::step_failure;
  std::string failure_;
  std::vector<TrajectoryNode> nodes_;
  std::vector<ode::DenseSegment<2>> segments_;
  std::shared_ptr<const StartupProfile> startup_;
  std::optional<double> r0_, du_r0_;
  std::size_t steps_ = 0;
};

Trajectory integrate_ivp(const ProblemModel& model, double alpha, const IntegratorControls& controls = {});

namespace detail {

// d/dx of (u, m) with x = log r
inline ode::State<2> radial_rhs(const ProblemModel& model, double x, double u, double m) {
  const double p = model.params.p, n = model.params.n;
  double r = std::exp(x);
  double rn1 = std::exp((n - 1.0) * x);
  double K = model.weight(r).K;
  return {r * phi_inv(m / rn1, p), -r * rn1 * K * model.nonlinearity.f_odd(u)};
}

ode::StepControl step_control(const IntegratorControls& c);

}  // namespace detail

class InverseProfile {
 public:
  explicit InverseProfile(const Trajectory& traj);

  // clamped to [u(R), alpha]
  double t(double s) const;
  // t'(s) = 1/u'(t(s))
  double dt_ds(double s) const;
  double s_min() const { return traj_->terminal().u; }
  double s_max() const { return traj_->alpha(); }
  const Trajectory& trajectory() const { return *traj_; }

 private:
  const Trajectory* traj_;
};

InverseProfile invert_profile(const Trajectory& traj);

struct EnergyValue {
  double E;
  double dE;
};

EnergyValue energy(const ProblemModel& model, const Trajectory& traj, double r);
EnergyValue energy_at_node(const ProblemModel& model, const TrajectoryNode& node);

// F̄(s) along a reference shot, and I(s, .) = t^p |u'|^p / p' + F̄(s) for any shot
class CapitalI {
 public:
  CapitalI(const ProblemModel& model, const Trajectory& ref);

  double Fbar(double s) const;
  double I(double s, const Trajectory& traj) const;
  double W(double s, const Trajectory& traj) const;

 private:
  const ProblemModel* model_;
  const Trajectory* ref_;
  InverseProfile inv_;
  std::vector<double> tail_;  // tail_[j] = integral from node j to R
  double segment_integral(std::size_t k, double xa, double xb) const;
};

struct CapitalIValue {
  double Fbar;
  double I;
  std::optional<double> W;
};

CapitalIValue capital_I(const ProblemModel& model, const Trajectory& ref, const Trajectory& traj, double s);

}  // namespace plshoot
