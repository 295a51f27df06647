#pragma once

#include <cmath>
#include <vector>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "plshoot/error.hpp"

namespace plshoot::quad {

// adaptive Gauss-Kronrod on a regular interval
template <class F>
double integrate(F&& f, double a, double b, double rel_tol = 1e-13, double* err = nullptr) {
  if (a == b) return 0.0;
  double e = 0.0;
  auto g = [&f](double x) { return f(x); };
  double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, a, b, 15, rel_tol, &e);
  if (err) *err = e;
  if (!std::isfinite(v)) throw DomainError("quadrature produced a non-finite value", {{"a", a}, {"b", b}});
  return v;
}

// fixed 10-point Gauss-Legendre; for short intervals of smooth integrands
template <class F>
double gauss10(F&& f, double a, double b) {
  auto g = [&f](double x) { return f(x); };
  return boost::math::quadrature::gauss<double, 10>::integrate(g, a, b);
}

// endpoint singularities allowed at a and b
template <class F>
double integrate_singular(F&& f, double a, double b, double rel_tol = 1e-12) {
  thread_local boost::math::quadrature::tanh_sinh<double> ts;
  if (a == b) return 0.0;
  auto g = [&f](double x) { return f(x); };
  double v = ts.integrate(g, a, b, rel_tol);
  if (!std::isfinite(v)) throw DomainError("singular quadrature did not converge", {{"a", a}, {"b", b}});
  return v;
}

template <class F>
double integrate_to_infinity(F&& f, double a, double rel_tol = 1e-12) {
  thread_local boost::math::quadrature::exp_sinh<double> es;
  auto g = [&f](double x) { return f(x); };
  double v = es.integrate(g, a, std::numeric_limits<double>::infinity(), rel_tol);
  if (!std::isfinite(v)) throw DomainError("tail quadrature did not converge", {{"a", a}});
  return v;
}

// Fritsch-Carlson slopes for a monotone-preserving cubic Hermite interpolant
inline std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
  std::size_t n = x.size();
  std::vector<double> d(n, 0.0), del(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) del[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
  if (n == 2) return {del[0], del[0]};
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (del[i - 1] * del[i] <= 0.0) continue;
    double h0 = x[i] - x[i - 1], h1 = x[i + 1] - x[i];
    double w1 = 2.0 * h1 + h0, w2 = h1 + 2.0 * h0;
    d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
  }
  // one-sided three-point ends, limited to keep monotonicity
  auto end = [](double h0, double h1, double d0, double d1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0.0) return 0.0;
    if (d0 * d1 <= 0.0 && std::abs(s) > 3.0 * std::abs(d0)) return 3.0 * d0;
    return s;
  };
  d[0] = end(x[1] - x[0], x[2] - x[1], del[0], del[1]);
  d[n - 1] = end(x[n - 1] - x[n - 2], x[n - 2] - x[n - 3], del[n - 2], del[n - 3]);
  return d;
}

}  // namespace plshoot::quad
