#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>

namespace plshoot::ode {

template <std::size_t N>
using State = std::array<double, N>;

// continuous extension of one accepted Dormand-Prince step (4th order)
template <std::size_t N>
struct DenseSegment {
  double x0 = 0.0;
  double h = 0.0;
  std::array<State<N>, 5> rc{};

  double x1() const { return x0 + h; }

  double component(std::size_t i, double x) const {
    double th = (x - x0) / h, th1 = 1.0 - th;
    return rc[0][i] + th * (rc[1][i] + th1 * (rc[2][i] + th * (rc[3][i] + th1 * rc[4][i])));
  }

  State<N> operator()(double x) const {
    State<N> y;
    for (std::size_t i = 0; i < N; ++i) y[i] = component(i, x);
    return y;
  }
};

struct StepControl {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  std::size_t controlled = 0;  // leading components entering the error norm; 0 means all
  std::size_t max_steps = 200000;
  double h_init = 0.0;  // 0 selects a starting step automatically
  double h_max = 0.0;   // 0 means unbounded
};

enum class Outcome { reached_end, stopped, step_failure };

struct RunResult {
  Outcome outcome = Outcome::reached_end;
  double x = 0.0;
  std::size_t steps = 0;
  std::size_t rejected = 0;
  std::string failure;
};

namespace dp {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace dp

// Integrates y' = rhs(x, y) from x0 to x_end. on_step(segment, y1) is called after every
// accepted step and returns true to stop. Non-finite stage values count as a rejected step.
template <std::size_t N, class Rhs, class OnStep>
RunResult dopri5(Rhs&& rhs, double x0, State<N> y, double x_end, const StepControl& ctl, OnStep&& on_step) {
  using namespace dp;
  const std::size_t nc = ctl.controlled == 0 ? N : std::min(ctl.controlled, N);
  RunResult res;
  double x = x0;
  const double dir = x_end >= x0 ? 1.0 : -1.0;

  auto norm = [&](const State<N>& v, const State<N>& ya, const State<N>& yb) {
    double s = 0.0;
    for (std::size_t i = 0; i < nc; ++i) {
      double sc = ctl.abs_tol + ctl.rel_tol * std::max(std::abs(ya[i]), std::abs(yb[i]));
      double q = v[i] / sc;
      s += q * q;
    }
    return std::sqrt(s / double(nc));
  };
  auto finite = [nc](const State<N>& v) {
    for (std::size_t i = 0; i < nc; ++i)
      if (!std::isfinite(v[i])) return false;
    return true;
  };

  State<N> k1 = rhs(x, y), k2, k3, k4, k5, k6, k7, yt, ynew;
  if (!finite(k1)) {
    res.outcome = Outcome::step_failure;
    res.failure = "non-finite derivative at start";
    res.x = x;
    return res;
  }

  double h = ctl.h_init;
  if (h <= 0.0) {
    // Hairer's starting step heuristic
    double d0 = norm(y, y, y), d1n = norm(k1, y, y);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h0 = std::min(h0, std::abs(x_end - x0));
    for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + dir * h0 * k1[i];
    State<N> f1 = rhs(x + dir * h0, yt);
    for (std::size_t i = 0; i < N; ++i) f1[i] -= k1[i];
    double d2 = finite(f1) ? norm(f1, y, y) / h0 : 1e10;
    double big = std::max(d1n, d2);
    double h1 = big <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / big, 0.2);
    h = std::min(100.0 * h0, h1);
  }
  if (ctl.h_max > 0.0) h = std::min(h, ctl.h_max);
  h = std::min(h, std::abs(x_end - x0));
  bool last_rejected = false;

  while (true) {
    if (res.steps >= ctl.max_steps) {
      res.outcome = Outcome::step_failure;
      res.failure = "maximum number of steps reached";
      res.x = x;
      return res;
    }
    double remaining = std::abs(x_end - x);
    bool final_step = false;
    if (h >= remaining * (1.0 - 1e-13)) {
      h = remaining;
      final_step = true;
    }
    double hs = dir * h;

    for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + hs * a21 * k1[i];
    k2 = rhs(x + c2 * hs, yt);
    for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
    k3 = rhs(x + c3 * hs, yt);
    for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    k4 = rhs(x + c4 * hs, yt);
    for (std::size_t i = 0; i < N; ++i)
      yt[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    k5 = rhs(x + c5 * hs, yt);
    for (std::size_t i = 0; i < N; ++i)
      yt[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    double xnew = final_step ? x_end : x + hs;
    k6 = rhs(x + hs, yt);
    for (std::size_t i = 0; i < N; ++i)
      ynew[i] = y[i] + hs * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    k7 = rhs(xnew, ynew);

    State<N> errv;
    for (std::size_t i = 0; i < N; ++i)
      errv[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
    double err = finite(ynew) && finite(k7) && finite(k2) && finite(k3) && finite(k4) && finite(k5) && finite(k6)
                     ? norm(errv, y, ynew)
                     : std::numeric_limits<double>::infinity();

    if (!(err <= 1.0)) {
      ++res.rejected;
      double fac = std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.1;
      h *= fac;
      last_rejected = true;
      if (h < 1e-14 * std::max(1.0, std::abs(x))) {
        res.outcome = Outcome::step_failure;
        res.failure = "step size underflow";
        res.x = x;
        return res;
      }
      continue;
    }

    DenseSegment<N> seg;
    seg.x0 = x;
    seg.h = xnew - x;
    for (std::size_t i = 0; i < N; ++i) {
      double ydiff = ynew[i] - y[i];
      double bspl = hs * k1[i] - ydiff;
      seg.rc[0][i] = y[i];
      seg.rc[1][i] = ydiff;
      seg.rc[2][i] = bspl;
      seg.rc[3][i] = ydiff - hs * k7[i] - bspl;
      seg.rc[4][i] = hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
    }
    x = xnew;
    y = ynew;
    k1 = k7;
    ++res.steps;
    res.x = x;

    if (on_step(static_cast<const DenseSegment<N>&>(seg), static_cast<const State<N>&>(y))) {
      res.outcome = Outcome::stopped;
      return res;
    }
    if (final_step) {
      res.outcome = Outcome::reached_end;
      return res;
    }

    double fac = err == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
    if (last_rejected) fac = std::min(fac, 1.0);
    last_rejected = false;
    h *= fac;
    if (ctl.h_max > 0.0) h = std::min(h, ctl.h_max);
  }
}

}  // namespace plshoot::ode
