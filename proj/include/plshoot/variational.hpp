#pragma once

#include <optional>
#include <string>
#include <vector>

#include "plshoot/model.hpp"
#include "plshoot/shoot.hpp"

namespace plshoot {

// phi = du/dalpha, dphi = dphi/dr, flux = d m/dalpha, theta = flux / q(t) (the t-units flux derivative)
struct VariationalNode {
  double r, phi, dphi, flux, theta;
};

class VariationalState {
 public:
  const std::vector<VariationalNode>& nodes() const { return nodes_; }
  double alpha() const { return base_.alpha(); }
  double r0() const { return nodes_.back().r; }
  const VariationalNode& at_r0() const { return nodes_.back(); }
  // the shot the derivatives belong to; differs from the input only when the startup had to shrink
  const Trajectory& base() const { return base_; }
  // node radii coincide with the base trajectory up to r0
  bool aligned() const { return aligned_; }
  int startup_shrinks() const { return shrinks_; }
  // last Picard correction of phi at the startup radius
  double startup_change() const { return startup_change_; }

  VariationalNode at(double r) const;
  double phi_at(double r) const { return at(r).phi; }
  double dphi_at(double r) const { return at(r).dphi; }

 private:
  friend VariationalState solve_variational(const ProblemModel&, const Trajectory&);

  Trajectory base_;
  std::vector<VariationalNode> nodes_;
  // startup chain (Psi_k, phi_k) for three Picard sweeps, Psi = -flux
  std::vector<ode::DenseSegment<6>> chain_;
  ode::State<6> chain_s0_{};
  double s0_ = 0.0, r1_ = 0.0, kappa_W_ = 0.0, kappa_U_ = 0.0;
  std::vector<ode::DenseSegment<4>> segments_;  // main phase (u, m, phi, flux) in x = log r
  double p_ = 2.0, n_ = 3.0;
  const ProblemModel* model_ = nullptr;
  bool aligned_ = false;
  int shrinks_ = 0;
  double startup_change_ = 0.0;
};

// Needs a shot that descends through u0. Throws DomainError otherwise.
VariationalState solve_variational(const ProblemModel& model, const Trajectory& traj);

struct AlphaDerivatives {
  double alpha;
  double r0, du_r0;
  double phi_r0, dphi_r0;
  double dr0_dalpha;     // -phi/u' at r0
  double d_r0du_dalpha;  // (n-p)/(p-1) phi + r0 phi' at r0
  // r0^{c-1} times the second derivative against d/dr[r^c phi] at r0, c = (n-p)/(p-1), by one-sided differences
  double identity_lhs, identity_rhs;
};

AlphaDerivatives alpha_derivatives(const ProblemModel& model, double alpha, const IntegratorControls& controls = {});

// central differences of two extra shots against the variational solution
struct FiniteDifferenceCheck {
  double h;
  double phi_rel_err;  // sup |phi - fd| / sup |phi| over nodes in [0, 0.9 r0]
  double dr0_fd, dr0_var, dr0_rel_err;
  std::size_t points;
};

FiniteDifferenceCheck fd_check(const ProblemModel& model, double alpha, double h, const IntegratorControls& controls);

// G(s) = p (n + t K'/K) F0(s) / (s f(s)) - (n - p), with t = t(s, alpha_ref)
double eval_G(const ProblemModel& model, const InverseProfile& ref, double s);
double eval_G(const ProblemModel& model, const Trajectory& ref, double s);

struct KwongReport {
  bool decreasing = true;  // r u'/u strictly decreasing on nodes in (0, r0)
  std::optional<Witness> witness;
  double endpoint = 0.0;  // (n-p)/(p-1) u0 + r0 u'(r0)
  bool endpoint_negative = false;
  std::size_t points = 0;
};

KwongReport kwong_check(const ProblemModel& model, const Trajectory& traj);

}  // namespace plshoot
