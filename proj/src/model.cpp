#include "plshoot/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include <boost/math/interpolators/cubic_hermite.hpp>

#include "plshoot/error.hpp"
#include "plshoot/quadrature.hpp"

namespace plshoot {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

// w/(1+w) and 1/(1+w) for w = exp(lw) without overflow
struct Logistic {
  double frac;  // w/(1+w)
  double comp;  // 1/(1+w)
};

Logistic logistic(double lw) {
  if (lw > 0) {
    double e = std::exp(-lw);
    return {1.0 / (1.0 + e), e / (1.0 + e)};
  }
  double e = std::exp(lw);
  return {e / (1.0 + e), 1.0 / (1.0 + e)};
}

WeightSample sample(double r, double logK, double slope) {
  double K = std::exp(logK);
  return {K, K * slope / r, slope};
}

WeightSample sample(double r, double logK, double lead, double rest) {
  WeightSample w = sample(r, logK, lead + rest);
  w.lead = lead;
  w.rest = rest;
  w.split = true;
  return w;
}

bool decreases(double a, double b) {
  // b follows a; plateaus of pure rounding are tolerated
  return a - b > -1e-12 * (1.0 + std::abs(a));
}

}  // namespace

Parameters::Parameters(double p_, double n_) : p(p_), n(n_) {
  if (!(p > 1.0) || !std::isfinite(p)) throw DomainError("exponent p must satisfy p > 1", {{"p", p}});
  if (!(n > p) || !std::isfinite(n)) throw DomainError("dimension n must satisfy n > p", {{"p", p}, {"n", n}});
}

Weight::Weight(std::string family, nlohmann::json params, Evaluator eval)
    : family_(std::move(family)), params_(std::move(params)), eval_(std::move(eval)) {}

WeightSample Weight::operator()(double r) const {
  if (!(r > 0.0)) throw DomainError("weight evaluated at r <= 0", {{"r", r}});
  WeightSample s = eval_(r);
  if (!(s.K > 0.0) || !std::isfinite(s.slope))
    throw DomainError("weight evaluation failed", {{"r", r}, {"K", s.K}, {"family", family_}});
  return s;
}

Weight Weight::constant() {
  return Weight("constant", nlohmann::json::object(), [](double) { return WeightSample{1.0, 0.0, 0.0}; });
}

Weight Weight::power(double theta) {
  require(std::isfinite(theta), "power weight needs finite theta");
  return Weight("power", {{"theta", theta}},
                [theta](double r) { return sample(r, theta * std::log(r), theta); });
}

Weight Weight::matukuma(double sigma) {
  require(sigma > 0.0, "matukuma weight needs sigma > 0");
  return Weight("matukuma", {{"sigma", sigma}}, [sigma](double r) {
    double lw = sigma * std::log(r);
    Logistic L = logistic(lw);
    // log K = -log(1 + w)
    double logK = lw > 0 ? -(lw + std::log1p(std::exp(-lw))) : -std::log1p(std::exp(lw));
    return sample(r, logK, -sigma, sigma * L.comp);
  });
}

Weight Weight::stellar(double sigma) {
  require(sigma > 0.0, "stellar weight needs sigma > 0");
  return Weight("stellar", {{"sigma", sigma}}, [sigma](double r) {
    double lr = std::log(r);
    Logistic L = logistic(2.0 * lr);
    double log1pr2 = lr > 0 ? 2.0 * lr + std::log1p(std::exp(-2.0 * lr)) : std::log1p(r * r);
    return sample(r, (sigma - 2.0) * lr - 0.5 * sigma * log1pr2, -2.0, sigma * L.comp);
  });
}

Weight Weight::power_general(double k, double l, double s, double sigma, double N, double p) {
  require(p > 1.0, "power_general needs p > 1");
  require(N + k > p, "power_general needs N + k > p");
  require(s > 0.0 && sigma >= 0.0, "power_general needs s > 0 and sigma >= 0");
  double beta = (N + k - p) / (p - 1.0);
  double lambda = std::pow(beta, 1.0 / beta);
  double e = (N + k) / beta + 1.0;
  double logC = (p - e) * std::log(beta);
  nlohmann::json params = {{"k", k}, {"l", l}, {"s", s}, {"sigma", sigma}, {"N", N}};
  return Weight("power_general", params, [=](double t) {
    double lx = std::log(t / lambda);
    double ls = s * lx;
    Logistic L = logistic(ls);
    double log1pw = ls > 0 ? ls + std::log1p(std::exp(-ls)) : std::log1p(std::exp(ls));
    double logK = logC + (l - k) * lx + sigma * lx - (sigma / s) * log1pw;
    return sample(t, logK, l - k, sigma * L.comp);
  });
}

Weight Weight::power_log(double theta, double a) {
  require(a > 0.0, "power_log needs a_exp > 0");
  return Weight("power_log", {{"theta", theta}, {"a_exp", a}}, [theta, a](double r) {
    double l1 = std::log1p(r);
    double logK = theta * std::log(r) + a * std::log(l1);
    return sample(r, logK, theta, a * r / ((1.0 + r) * l1));
  });
}

// r^θ exp(-(log r)^2/2) up to r_j = 1/e, then K(r_j)(r/r_j)^θ (1 + log(r/r_j)).
// Value, slope and slope derivative match at r_j; the slope decreases to θ.
Weight Weight::log_gaussian(double theta) {
  require(std::isfinite(theta), "log_gaussian needs finite theta");
  return Weight("log_gaussian", {{"theta", theta}}, [theta](double r) {
    double lr = std::log(r);
    if (lr <= -1.0) return sample(r, theta * lr - 0.5 * lr * lr, theta, -lr);
    double L = lr + 1.0;
    double logKj = -theta - 0.5;
    return sample(r, logKj + theta * L + std::log1p(L), theta, 1.0 / (1.0 + L));
  });
}

Weight Weight::tabulated(std::vector<double> r, std::vector<double> K, std::vector<double> dK) {
  std::size_t N = r.size();
  require(N >= 4 && K.size() == N, "tabulated weight needs at least 4 matching (r, K) nodes");
  require(dK.empty() || dK.size() == N, "tabulated weight dK must match r");
  for (std::size_t i = 0; i < N; ++i) {
    require(r[i] > 0.0 && K[i] > 0.0 && std::isfinite(K[i]), "tabulated weight needs r > 0 and K > 0");
    if (i > 0) require(r[i] > r[i - 1], "tabulated radii must be strictly increasing");
  }
  nlohmann::json params = {{"r", r}, {"K", K}};
  if (!dK.empty()) params["dK"] = dK;

  std::vector<double> x(N), y(N);
  for (std::size_t i = 0; i < N; ++i) {
    x[i] = std::log(r[i]);
    y[i] = std::log(K[i]);
  }
  struct Table {
    std::function<double(double)> value, slope;
    double x0, x1, y0, y1, s0, s1;
  };
  auto table = std::make_shared<Table>();
  table->x0 = x.front();
  table->x1 = x.back();
  table->y0 = y.front();
  table->y1 = y.back();
  std::vector<double> s(N);
  if (!dK.empty()) {
    for (std::size_t i = 0; i < N; ++i) s[i] = r[i] * dK[i] / K[i];
  } else {
    s = quad::pchip_slopes(x, y);
  }
  table->s0 = s.front();
  table->s1 = s.back();
  auto spline = std::make_shared<boost::math::interpolators::cubic_hermite<std::vector<double>>>(
      std::move(x), std::move(y), std::move(s));
  table->value = [spline](double v) { return (*spline)(v); };
  table->slope = [spline](double v) { return spline->prime(v); };
  return Weight("tabulated", params, [table](double rr) {
    double lx = std::log(rr);
    // linear extrapolation of log K outside the table
    if (lx <= table->x0) return sample(rr, table->y0 + table->s0 * (lx - table->x0), table->s0);
    if (lx >= table->x1) return sample(rr, table->y1 + table->s1 * (lx - table->x1), table->s1);
    return sample(rr, table->value(lx), table->slope(lx));
  });
}

Weight Weight::closure(std::string name, Evaluator eval) {
  require(static_cast<bool>(eval), "closure weight needs an evaluator");
  return Weight("closure", {{"name", std::move(name)}}, std::move(eval));
}

Nonlinearity Nonlinearity::power_diff(double q1, double q2) {
  require(q1 > 0.0 && q2 > 0.0, "power_diff needs q1 > 0 and q2 > 0");
  require(q1 != q2, "power_diff needs q1 != q2");
  Nonlinearity nl;
  nl.family_ = "power_diff";
  nl.params_ = {{"q1", q1}, {"q2", q2}};
  nl.u0_ = 1.0;
  nl.smooth_below_u0_ = true;
  nl.f_ = [q1, q2](double u) { return std::pow(u, q1) - std::pow(u, q2); };
  nl.df_ = [q1, q2](double u) {
    if (!(u > 0.0)) throw DomainError("power_diff derivative requested at u <= 0", {{"u", u}});
    return q1 * std::pow(u, q1 - 1.0) - q2 * std::pow(u, q2 - 1.0);
  };
  nl.F_ = [q1, q2](double u) {
    return std::pow(u, q1 + 1.0) / (q1 + 1.0) - std::pow(u, q2 + 1.0) / (q2 + 1.0);
  };
  nl.log_abs_F_ = [q1, q2](double u) {
    // F = u^{q2+1} (u^{q1-q2}/(q1+1) - 1/(q2+1))
    double lu = std::log(u);
    double bracket = std::exp((q1 - q2) * lu) / (q1 + 1.0) - 1.0 / (q2 + 1.0);
    return (q2 + 1.0) * lu + std::log(std::abs(bracket));
  };
  nl.F_u0_ = nl.F_(1.0);
  return nl;
}

Nonlinearity Nonlinearity::closure(std::string name, Fn f, Fn df, double u0, Fn F) {
  require(static_cast<bool>(f) && static_cast<bool>(df), "closure nonlinearity needs f and f'");
  require(u0 > 0.0, "closure nonlinearity needs u0 > 0");
  Nonlinearity nl;
  nl.family_ = "closure";
  nl.params_ = {{"name", std::move(name)}, {"u0", u0}};
  nl.u0_ = u0;
  nl.f_ = f;
  nl.df_ = [df, u0](double u) {
    if (u < u0) throw DomainError("derivative of closure nonlinearity requested below u0", {{"u", u}});
    return df(u);
  };
  if (F) {
    nl.F_ = std::move(F);
  } else {
    nl.F_ = [f](double u) {
      if (u == 0.0) return 0.0;
      return u > 0 ? quad::integrate_singular(f, 0.0, u) : -quad::integrate_singular(f, u, 0.0);
    };
  }
  nl.log_abs_F_ = [Fc = nl.F_](double u) { return std::log(std::abs(Fc(u))); };
  nl.F_u0_ = nl.F_(u0);
  return nl;
}

double Nonlinearity::f(double u) const { return f_(u); }

double Nonlinearity::df(double u) const { return df_(u); }

double Nonlinearity::F(double u) const { return F_(u); }

double Nonlinearity::log_abs_F(double u) const { return log_abs_F_(u); }

ProblemModel::ProblemModel(Parameters p, Weight w, Nonlinearity nl)
    : params(p), weight(std::move(w)), nonlinearity(std::move(nl)) {}

ModelPoint eval_model(const ProblemModel& model, double r, double u) {
  if (!(u >= 0.0)) throw DomainError("model evaluated at u < 0", {{"u", u}});
  WeightSample w = model.weight(r);
  const Nonlinearity& nl = model.nonlinearity;
  ModelPoint pt{w.K, w.dK, w.g(model.params.p), nl.f(u), nl.F(u), nl.F0(u), std::nullopt};
  if (u >= nl.u0()) pt.df = nl.df(u);
  return pt;
}

bool HypothesisReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const HypothesisCheck& c) { return c.pass; });
}

const HypothesisCheck* HypothesisReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi > lo && count >= 2)) throw DomainError("log grid needs 0 < lo < hi and count >= 2");
  std::vector<double> g(count);
  double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) g[i] = std::exp(a + (b - a) * double(i) / double(count - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::vector<double> default_weight_grid() { return log_grid(1e-6, 1e6, 481); }

std::vector<double> default_f_grid(double u0, double u_max_factor) {
  std::vector<double> g;
  for (double v : log_grid(1e-6 * u0, u0 * (1.0 - 1e-6), 200)) g.push_back(v);
  g.push_back(u0);
  for (double d : log_grid(1e-6 * u0, (u_max_factor - 1.0) * u0, 300)) g.push_back(u0 + d);
  return g;
}

HypothesisReport check_K1(const Weight& weight, const Parameters& params, const std::vector<double>& grid) {
  if (grid.size() < 2) throw DomainError("K1 check needs a grid of at least 2 points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]) || !(grid[0] > 0)) throw DomainError("K1 grid must be positive and increasing");

  HypothesisReport rep;
  rep.grid = grid;
  HypothesisCheck pos{"g_positive", true, std::nullopt};
  HypothesisCheck dec{"g_decreasing", true, std::nullopt};
  std::vector<double> g(grid.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      g[i] = weight.g(grid[i], params.p);
    } catch (const Error& e) {
      if (pos.pass) pos = {"g_positive", false, Witness{grid[i], std::string("evaluation failed: ") + e.what()}};
      continue;
    }
    if (!(g[i] > 0.0) && pos.pass)
      pos = {"g_positive", false, Witness{grid[i], "g(r)=" + fmt(g[i]) + " <= 0"}};
  }
  for (std::size_t i = 1; i < grid.size() && dec.pass; ++i) {
    if (std::isnan(g[i - 1]) || std::isnan(g[i])) continue;
    if (!decreases(g[i - 1], g[i]))
      dec = {"g_decreasing", false,
             Witness{grid[i], "g increased from " + fmt(g[i - 1]) + " at r=" + fmt(grid[i - 1]) + " to " +
                                  fmt(g[i]) + " at r=" + fmt(grid[i])}};
  }
  rep.checks = {pos, dec};
  return rep;
}

HypothesisReport check_f_hypotheses(const Nonlinearity& nl, const Parameters& params,
                                    const std::vector<double>& grid) {
  const double u0 = nl.u0();
  const double p = params.p;
  HypothesisReport rep;
  rep.grid = grid;
  if (grid.empty()) throw DomainError("f hypotheses need a nonempty grid");
  double u_max = *std::max_element(grid.begin(), grid.end());
  bool below = std::any_of(grid.begin(), grid.end(), [u0](double u) { return u > 0 && u < u0; });
  if (!(u_max > u0) || !below) throw DomainError("f grid must span both sides of u0", {{"u0", u0}});

  auto safe = [](auto&& fn, double u, double& out) {
    try {
      out = fn(u);
      return std::isfinite(out);
    } catch (const Error&) {
      return false;
    }
  };
  auto fval = [&](double u) { return nl.f(u); };
  auto dfval = [&](double u) { return nl.df(u); };

  // sign pattern: f(0)=0, f <= 0 and not identically zero below u0, f > 0 above
  HypothesisCheck f1{"sign_pattern", true, std::nullopt};
  {
    double v = 0.0;
    if (!safe(fval, 0.0, v) || v != 0.0) f1 = {"sign_pattern", false, Witness{0.0, "f(0)=" + fmt(v) + " != 0"}};
    if (f1.pass && (!safe(fval, u0, v) || std::abs(v) > 1e-12))
      f1 = {"sign_pattern", false, Witness{u0, "f(u0)=" + fmt(v) + " != 0"}};
    bool negative_seen = false;
    for (double u : grid) {
      if (!f1.pass) break;
      if (u <= 0.0 || u == u0) continue;
      if (!safe(fval, u, v)) {
        f1 = {"sign_pattern", false, Witness{u, "f(u) not finite"}};
      } else if (u < u0 && v > 0.0) {
        f1 = {"sign_pattern", false, Witness{u, "f(u)=" + fmt(v) + " > 0 below u0"}};
      } else if (u > u0 && !(v > 0.0)) {
        f1 = {"sign_pattern", false, Witness{u, "f(u)=" + fmt(v) + " <= 0 above u0"}};
      }
      if (u < u0 && v < 0.0) negative_seen = true;
    }
    if (f1.pass && !negative_seen) f1 = {"sign_pattern", false, Witness{u0, "f vanishes identically below u0"}};
  }

  // local Lipschitz: finite on the grid, difference quotients above u0 bounded under refinement
  HypothesisCheck f2{"local_lipschitz", true, std::nullopt};
  {
    double v = 0.0;
    for (double u : grid)
      if (u >= 0.0 && !safe(fval, u, v)) {
        f2 = {"local_lipschitz", false, Witness{u, "f(u) not finite"}};
        break;
      }
    // local: nested uniform grids on each window [a, 2a] between u0 and u_max
    for (double a = u0; a < u_max && f2.pass; a *= 2.0) {
      double b = std::min(2.0 * a, u_max);
      std::vector<double> L, at;
      for (int level = 0; level < 4; ++level) {
        std::size_t count = std::size_t(256) << level;
        double w = (b - a) / double(count);
        double worst = 0.0, where = a, prev = nl.f(a);
        for (std::size_t i = 1; i <= count; ++i) {
          double u = a + w * double(i);
          double cur = nl.f(u);
          double q = std::abs(cur - prev) / w;
          if (!(q <= worst)) {
            worst = q;
            where = u;
          }
          prev = cur;
        }
        L.push_back(worst);
        at.push_back(where);
      }
      for (std::size_t k = 1; k < L.size() && f2.pass; ++k)
        if (!std::isfinite(L[k]) || L[k] > 1.1 * L[k - 1])
          f2 = {"local_lipschitz", false,
                Witness{at[k], "difference quotient grows under refinement: " + fmt(L[k - 1]) + " -> " + fmt(L[k])}};
    }
  }

  // growth bound: (p-1) f(u) <= f'(u)(u-u0) on [u0, u_max]
  HypothesisCheck f3{"growth_bound", true, std::nullopt};
  for (double u : grid) {
    if (u < u0) continue;
    double fv, dfv;
    if (!safe(fval, u, fv) || !safe(dfval, u, dfv)) {
      f3 = {"growth_bound", false, Witness{u, "f or f' not available"}};
      break;
    }
    double lhs = (p - 1.0) * fv, rhs = dfv * (u - u0);
    if (lhs - rhs > 1e-12 * (1.0 + std::abs(lhs) + std::abs(rhs))) {
      f3 = {"growth_bound", false, Witness{u, "(p-1)f(u)=" + fmt(lhs) + " > f'(u)(u-u0)=" + fmt(rhs)}};
      break;
    }
  }

  // monotone quotient: u f'(u)/f(u) non-increasing on (u0, u_max]
  HypothesisCheck f4{"monotone_quotient", true, std::nullopt};
  {
    std::vector<double> above;
    for (double u : grid)
      if (u > u0) above.push_back(u);
    std::sort(above.begin(), above.end());
    double prev = std::numeric_limits<double>::quiet_NaN(), prev_u = u0;
    for (double u : above) {
      double fv, dfv;
      if (!safe(fval, u, fv) || !safe(dfval, u, dfv) || fv == 0.0) {
        f4 = {"monotone_quotient", false, Witness{u, "quotient u f'/f not available"}};
        break;
      }
      double q = u * dfv / fv;
      if (!std::isnan(prev) && !decreases(prev, q)) {
        f4 = {"monotone_quotient", false,
              Witness{u, "u f'/f increased from " + fmt(prev) + " at u=" + fmt(prev_u) + " to " + fmt(q)}};
        break;
      }
      prev = q;
      prev_u = u;
    }
  }
  rep.checks = {f1, f2, f3, f4};
  return rep;
}

bool check_example_conditions(double k, double l, double N, double p) {
  if (!(p > 1.0)) throw DomainError("example conditions need p > 1", {{"p", p}});
  return N + k > p && l >= k - p;
}

}  // namespace plshoot
