#include "plshoot/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <boost/math/interpolators/cubic_hermite.hpp>

#include "plshoot/config.hpp"
#include "plshoot/error.hpp"
#include "plshoot/quadrature.hpp"

namespace plshoot {

namespace {

using nlohmann::json;
using Hermite = boost::math::interpolators::cubic_hermite<std::vector<double>>;

constexpr double kTableLo = 1e-16, kTableHi = 1e12;
constexpr std::size_t kPerDecade = 32;
constexpr double kTailDecades = 6.0;

std::vector<double> default_table() {
  auto decades = std::log10(kTableHi / kTableLo);
  return log_grid(kTableLo, kTableHi, std::size_t(std::lround(decades * double(kPerDecade))) + 1);
}

// log(1 + e^y) without overflow
double softplus(double y) { return y > 0.0 ? y + std::log1p(std::exp(-y)) : std::log1p(std::exp(y)); }

void keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw UsageError(where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw UsageError("unknown key '" + it.key() + "' in " + where);
  for (const auto& k : allowed)
    if (!obj.contains(k)) throw UsageError("missing key '" + k + "' in " + where);
}

double num(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw UsageError("key '" + key + "' in " + where + " must be a number");
  return v.get<double>();
}

std::size_t cell(const std::vector<double>& v, double y) {
  auto it = std::upper_bound(v.begin(), v.end(), y);
  std::size_t i = std::size_t(it - v.begin());
  if (i == 0) return 0;
  return std::min(i - 1, v.size() - 2);
}

// Newton on a monotone increasing g(x) = target, kept inside [a, b] when that bracket is finite
template <class G, class D>
double polish(G&& g, D&& dg, double x, double target, double a, double b) {
  for (int it = 0; it < 8; ++it) {
    double dx = (g(x) - target) / dg(x);
    double nx = x - dx;
    if (nx < a || nx > b) nx = 0.5 * (x + (nx < a ? a : b));
    if (std::abs(nx - x) <= 1e-15 * std::max(1.0, std::abs(x))) return nx;
    x = nx;
  }
  return x;
}

}  // namespace

GeneralWeightPair::GeneralWeightPair(std::string family, json params, Evaluator eval)
    : family_(std::move(family)), params_(std::move(params)), eval_(std::move(eval)) {}

GeneralWeightPair GeneralWeightPair::power_ab(double a_exp, double b_exp, double s, double sigma) {
  if (!(s > 0.0)) throw DomainError("power_ab needs s > 0", {{"s", s}});
  return GeneralWeightPair("power_ab", {{"a_exp", a_exp}, {"b_exp", b_exp}, {"s", s}, {"sigma", sigma}},
                           [=](double r) {
                             double lr = std::log(r);
                             double frac = 1.0 / (1.0 + std::exp(-s * lr));  // r^s/(1+r^s)
                             return PairSample{a_exp * lr, a_exp, b_exp * lr - sigma / s * softplus(s * lr),
                                               b_exp - sigma * frac};
                           });
}

GeneralWeightPair GeneralWeightPair::matukuma_ab(double n, double sigma) {
  if (!(sigma > 0.0)) throw DomainError("matukuma_ab needs sigma > 0", {{"sigma", sigma}});
  GeneralWeightPair g = power_ab(n - 1.0, n - 1.0, sigma, sigma);
  g.family_ = "matukuma_ab";
  g.params_ = {{"n", n}, {"sigma", sigma}};
  return g;
}

GeneralWeightPair GeneralWeightPair::closure(std::string name, Evaluator eval) {
  if (!eval) throw DomainError("closure pair needs an evaluator");
  return GeneralWeightPair("closure", {{"name", std::move(name)}}, std::move(eval));
}

PairSample GeneralWeightPair::operator()(double r) const {
  if (!(r > 0.0)) throw DomainError("weight pair evaluated at r <= 0", {{"r", r}});
  PairSample s = eval_(r);
  if (!std::isfinite(s.log_a) || !std::isfinite(s.log_b) || !std::isfinite(s.slope_a) || !std::isfinite(s.slope_b))
    throw DomainError("weight pair evaluation failed", {{"r", r}, {"family", family_}});
  return s;
}

// ---- (a, b) form to K form

struct TransformedModel::Impl {
  GeneralWeightPair pair;
  double p, N, pc, e, c, log_scale;
  std::vector<double> x, lh, lt;
  std::shared_ptr<Hermite> inv;  // x against log t

  double rate(double xx) const { return std::exp(xx + (1.0 - pc) * pair(std::exp(xx)).log_a); }

  // h beyond the last node: quadrature over a few decades, then the power-law tail
  double h_above(double xx) const {
    double xT = x.back() + kTailDecades * std::log(10.0);
    double v = 0.0;
    if (xx < xT) v = quad::integrate([&](double y) { return rate(y); }, xx, xT, 1e-13);
    double xs = std::max(xx, xT);
    PairSample s = pair(std::exp(xs));
    double decay = (pc - 1.0) * s.slope_a - 1.0;
    if (!(decay > 0.0))
      throw DomainError("a^{1-p'} is not integrable at infinity: h diverges",
                        {{"r", std::exp(xs)}, {"local_exponent", (1.0 - pc) * s.slope_a}});
    return v + rate(xs) / decay;
  }

  double log_h(double xx) const {
    if (xx >= x.back()) return std::log(h_above(xx));
    if (xx <= x.front()) {
      // local power law of a^{1-p'} below the table
      double x0 = x.front(), k = (pc - 1.0) * pair(std::exp(x0)).slope_a - 1.0;
      double span = x0 - xx;
      double part = rate(x0) * (std::abs(k * span) < 1e-12 ? span : std::expm1(k * span) / k);
      return std::log(std::exp(lh.front()) + part);
    }
    std::size_t i = cell(x, xx);
    if (xx == x[i]) return lh[i];
    double part = quad::gauss10([&](double y) { return rate(y); }, xx, x[i + 1]);
    return std::log(std::exp(lh[i + 1]) + part);
  }

  // r a^{1-p'} / h = -r h'/h
  double H(double xx, double lhx) const { return std::exp(xx + (1.0 - pc) * pair(std::exp(xx)).log_a - lhx); }

  double x_of_logt(double target) const {
    double guess, a = -std::numeric_limits<double>::infinity(), b = std::numeric_limits<double>::infinity();
    if (target <= lt.front()) {
      guess = x.front() + (target - lt.front()) / (c * H(x.front(), lh.front()));
      b = x.front();
    } else if (target >= lt.back()) {
      guess = x.back() + (target - lt.back()) / (c * H(x.back(), lh.back()));
      a = x.back();
    } else {
      std::size_t i = cell(lt, target);
      a = x[i];
      b = x[i + 1];
      guess = std::clamp((*inv)(target), a, b);
    }
    return polish([&](double xx) { return -c * log_h(xx); }, [&](double xx) { return c * H(xx, log_h(xx)); },
                  guess, target, a, b);
  }
};

TransformedModel::TransformedModel(std::shared_ptr<const Impl> impl, ProblemModel model)
    : impl_(std::move(impl)), model_(std::move(model)) {}

double TransformedModel::h(double r) const { return std::exp(impl_->log_h(std::log(r))); }
double TransformedModel::forward(double r) const {
  if (r <= 0.0) return 0.0;
  return std::exp(-impl_->c * impl_->log_h(std::log(r)));
}
double TransformedModel::inverse(double t) const {
  if (t <= 0.0) return 0.0;
  return std::exp(impl_->x_of_logt(std::log(t)));
}
double TransformedModel::r_lo() const { return std::exp(impl_->x.front()); }
double TransformedModel::r_hi() const { return std::exp(impl_->x.back()); }

double TransformedModel::dt_dr(double r) const {
  double x = std::log(r), lh = impl_->log_h(x);
  double t = std::exp(-impl_->c * lh);
  return t / r * impl_->c * impl_->H(x, lh);
}

WeightSample TransformedModel::K_at_r(double r) const {
  const Impl& I = *impl_;
  double x = std::log(r), lh = I.log_h(x);
  PairSample s = I.pair(r);
  double H = I.H(x, lh);
  double logK = I.log_scale + (I.pc - 1.0) * s.log_a + s.log_b + I.e * lh;
  double slope = ((I.pc - 1.0) * s.slope_a + s.slope_b - I.e * H) / (I.c * H);
  double t = std::exp(-I.c * lh);
  double K = std::exp(logK);
  return {K, K * slope / t, slope};
}

double TransformedModel::g_identity(double r) const {
  const Impl& I = *impl_;
  double x = std::log(r), lh = I.log_h(x);
  PairSample s = I.pair(r);
  double H = I.H(x, lh);
  return I.pc * (I.N - I.p) / (I.p - 1.0) * (((I.pc - 1.0) * s.slope_a + s.slope_b) / (I.pc * H) - (I.p - 1.0));
}

std::vector<PulledNode> TransformedModel::pull_back(const Trajectory& traj) const {
  std::vector<PulledNode> out;
  out.reserve(traj.nodes().size());
  for (const auto& nd : traj.nodes()) {
    if (nd.r <= 0.0) {
      out.push_back({0.0, nd.u, 0.0});
      continue;
    }
    double r = inverse(nd.r);
    out.push_back({r, nd.u, nd.du * dt_dr(r)});
  }
  return out;
}

std::vector<MapRow> TransformedModel::table(std::size_t per_decade) const {
  double decades = std::log10(r_hi() / r_lo());
  std::size_t count = std::size_t(std::lround(decades * double(per_decade))) + 1;
  std::vector<MapRow> rows;
  for (double r : log_grid(r_lo(), r_hi(), count)) rows.push_back({r, forward(r), h(r), K_at_r(r).K});
  return rows;
}

json TransformedModel::config(std::size_t per_decade) const {
  const Nonlinearity& nl = model_.nonlinearity;
  if (nl.family() == "closure") throw DomainError("closure nonlinearities have no config representation");
  double tl = t_lo(), th = t_hi();
  std::size_t count = std::size_t(std::lround(std::log10(th / tl) * double(per_decade))) + 1;
  std::vector<double> ts = log_grid(tl, th, count), K, dK;
  for (double& t : ts) {
    WeightSample w = K_at_r(inverse(t));
    K.push_back(w.K);
    dK.push_back(w.K * w.slope / t);
  }
  return {{"p", p()},
          {"n", N()},
          {"weight", {{"family", "tabulated"}, {"params", {{"r", ts}, {"K", K}, {"dK", dK}}}}},
          {"nonlinearity", {{"family", nl.family()}, {"params", nl.params()}}}};
}

TransformedModel transform_ab_to_K(const GeneralWeightPair& pair, double p, double N, const Nonlinearity& nl,
                                   std::vector<double> grid) {
  if (!(p > 1.0)) throw DomainError("p must exceed 1", {{"p", p}});
  if (!(N > p)) throw DomainError("transformed dimension needs N > p", {{"N", N}, {"p", p}});
  if (grid.empty()) grid = default_table();
  if (grid.size() < 4) throw DomainError("transform grid needs at least 4 radii");
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1])))
      throw DomainError("transform grid must be positive and increasing", {{"index", i}});

  auto I = std::make_shared<TransformedModel::Impl>(TransformedModel::Impl{pair, p, N, p / (p - 1.0), 0, 0, 0, {}, {}, {}, {}});
  I->e = N * (p - 1.0) / (N - p) + 1.0;
  I->c = (p - 1.0) / (N - p);
  I->log_scale = p * std::log((N - p) / (p - 1.0));

  // h must blow up at the origin
  PairSample s0 = pair(grid.front());
  if ((I->pc - 1.0) * s0.slope_a < 1.0 - 1e-12)
    throw DomainError("a^{1-p'} is integrable at 0, so t(r) does not start at 0",
                      {{"r", grid.front()}, {"local_exponent", (1.0 - I->pc) * s0.slope_a}});

  std::size_t M = grid.size();
  I->x.resize(M);
  I->lh.resize(M);
  I->lt.resize(M);
  for (std::size_t i = 0; i < M; ++i) I->x[i] = std::log(grid[i]);
  double h = I->h_above(I->x.back());
  I->lh[M - 1] = std::log(h);
  for (std::size_t i = M - 1; i-- > 0;) {
    h += quad::gauss10([&](double y) { return I->rate(y); }, I->x[i], I->x[i + 1]);
    I->lh[i] = std::log(h);
  }
  std::vector<double> dx(M);
  for (std::size_t i = 0; i < M; ++i) {
    I->lt[i] = -I->c * I->lh[i];
    dx[i] = 1.0 / (I->c * I->H(I->x[i], I->lh[i]));
    if (i > 0 && !(I->lt[i] > I->lt[i - 1]))
      throw DomainError("forward map is not strictly increasing", {{"r", grid[i]}});
  }
  I->inv = std::make_shared<Hermite>(std::vector<double>(I->lt), std::vector<double>(I->x), std::move(dx));

  std::shared_ptr<const TransformedModel::Impl> cimpl = I;
  // K~ as a function of t goes through the inverse map
  auto tmp = std::make_shared<TransformedModel>(TransformedModel(cimpl, ProblemModel(Parameters(p, N), Weight::constant(), nl)));
  Weight w = Weight::closure("transformed_" + pair.family(), [tmp](double t) {
    return tmp->K_at_r(tmp->inverse(t));
  });
  for (std::size_t i = 0; i < M; ++i) {
    WeightSample k = tmp->K_at_r(grid[i]);
    if (!(k.K > 0.0) || !std::isfinite(k.K) || !std::isfinite(k.slope))
      throw DomainError("transformed weight is not positive and finite", {{"r", grid[i]}});
  }
  return TransformedModel(cimpl, ProblemModel(Parameters(p, N), std::move(w), nl));
}

GeneralWeightPair pair_from_json(const json& node) {
  if (!node.is_object() || !node.contains("family") || !node["family"].is_string())
    throw UsageError("pair.family must be a string");
  std::string fam = node["family"];
  json params = node.value("params", json::object());
  for (auto it = node.begin(); it != node.end(); ++it)
    if (it.key() != "family" && it.key() != "params") throw UsageError("unknown key '" + it.key() + "' in pair");
  std::string where = "pair.params (" + fam + ")";
  if (fam == "power_ab") {
    keys(params, {"a_exp", "b_exp", "s", "sigma"}, where);
    return GeneralWeightPair::power_ab(num(params, "a_exp", where), num(params, "b_exp", where),
                                       num(params, "s", where), num(params, "sigma", where));
  }
  if (fam == "matukuma_ab") {
    keys(params, {"n", "sigma"}, where);
    return GeneralWeightPair::matukuma_ab(num(params, "n", where), num(params, "sigma", where));
  }
  throw UsageError("unknown pair family '" + fam + "'");
}

TransformedModel transform_from_json(const json& doc) {
  keys(doc, {"p", "N", "pair", "nonlinearity"}, "transform config");
  double p = num(doc, "p", "transform config"), N = num(doc, "N", "transform config");
  return transform_ab_to_K(pair_from_json(doc["pair"]), p, N, nonlinearity_from_json(doc["nonlinearity"]));
}

// ---- t = int_0^r K^{1/p}

struct QtChange::Impl {
  ProblemModel model;
  double p, n;
  std::vector<double> x, lt;
  std::shared_ptr<Hermite> inv;

  double rate(double xx) const { return std::exp(xx + std::log(model.weight(std::exp(xx)).K) / p); }

  double head(double xx) const {
    WeightSample w = model.weight(std::exp(xx));
    return rate(xx) / (1.0 + w.slope / p);
  }

  double t_of_x(double xx) const {
    if (xx <= x.front()) return head(xx);
    if (xx >= x.back())
      return std::exp(lt.back()) + quad::integrate([&](double y) { return rate(y); }, x.back(), xx, 1e-13);
    std::size_t i = cell(x, xx);
    if (xx == x[i]) return std::exp(lt[i]);
    return std::exp(lt[i]) + quad::gauss10([&](double y) { return rate(y); }, x[i], xx);
  }

  // d log t / dx
  double dlt(double xx) const { return rate(xx) / t_of_x(xx); }

  double x_of_t(double t) const {
    double target = std::log(t);
    double guess, a = -std::numeric_limits<double>::infinity(), b = std::numeric_limits<double>::infinity();
    if (target <= lt.front()) {
      guess = x.front() + (target - lt.front()) / dlt(x.front());
      b = x.front();
    } else if (target >= lt.back()) {
      guess = x.back() + (target - lt.back()) / dlt(x.back());
      a = x.back();
    } else {
      std::size_t i = cell(lt, target);
      a = x[i];
      b = x[i + 1];
      guess = std::clamp((*inv)(target), a, b);
    }
    return polish([&](double xx) { return std::log(t_of_x(xx)); }, [&](double xx) { return dlt(xx); }, guess, target,
                  a, b);
  }
};

QtChange qt_change(const ProblemModel& model) {
  const double p = model.params.p;
  std::vector<double> grid = default_table();
  auto I = std::make_shared<QtChange::Impl>(QtChange::Impl{model, p, model.params.n, {}, {}, {}});
  std::size_t M = grid.size();
  I->x.resize(M);
  I->lt.resize(M);
  for (std::size_t i = 0; i < M; ++i) I->x[i] = std::log(grid[i]);
  WeightSample w0 = model.weight(grid.front());
  if (!(1.0 + w0.slope / p > 0.0))
    throw DomainError("K^{1/p} is not integrable at the origin", {{"r", grid.front()}, {"slope", w0.slope}});
  double t = I->head(I->x.front());
  I->lt[0] = std::log(t);
  std::vector<double> dx(M);
  for (std::size_t i = 0; i < M; ++i) {
    if (i > 0) {
      t += quad::gauss10([&](double y) { return I->rate(y); }, I->x[i - 1], I->x[i]);
      I->lt[i] = std::log(t);
    }
    dx[i] = t / I->rate(I->x[i]);
  }
  I->inv = std::make_shared<Hermite>(std::vector<double>(I->lt), std::vector<double>(I->x), std::move(dx));
  return QtChange(I);
}

double QtChange::t_of_r(double r) const {
  if (r <= 0.0) return 0.0;
  return impl_->t_of_x(std::log(r));
}

double QtChange::r_of_t(double t) const {
  if (t <= 0.0) return 0.0;
  return std::exp(impl_->x_of_t(t));
}

double QtChange::q(double t) const {
  double r = r_of_t(t);
  const double p = impl_->p, n = impl_->n;
  return std::pow(r, n - 1.0) * std::pow(impl_->model.weight(r).K, (p - 1.0) / p);
}

double QtChange::log_slope_q(double t) const {
  const double p = impl_->p, n = impl_->n;
  double r = r_of_t(t);
  WeightSample w = impl_->model.weight(r);
  return (n - 1.0 + w.slope * (p - 1.0) / p) * t / (r * std::pow(w.K, 1.0 / p));
}

double QtChange::slope_bound(double t) const {
  const double p = impl_->p, n = impl_->n;
  double g = impl_->model.weight(r_of_t(t)).g(p);
  return (n - p) * p / g + p - 1.0;
}

double QtChange::r_lo() const { return std::exp(impl_->x.front()); }
double QtChange::r_hi() const { return std::exp(impl_->x.back()); }

// ---- compact support

std::string to_string(SupportVerdict v) {
  switch (v) {
    case SupportVerdict::finite: return "finite";
    case SupportVerdict::infinite: return "infinite";
    case SupportVerdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

CompactSupportResult compact_support_test(const Nonlinearity& nl, double exponent, double delta) {
  if (!(exponent > 0.0 && exponent < 1.0)) throw DomainError("exponent must lie in (0, 1)", {{"exponent", exponent}});
  if (!(delta > 0.0 && delta < nl.u0())) throw DomainError("delta must lie in (0, u0)", {{"delta", delta}});
  constexpr int kLevels = 8;  // u down to delta e^{-256}
  const double ld = std::log(delta);
  for (double u : log_grid(delta * 1e-12, delta, 64))
    if (!(nl.F(u) < 0.0)) throw DomainError("F must be negative on (0, delta]", {{"u", u}, {"F", nl.F(u)}});

  // u = delta e^{-x}
  auto logG = [&](double x) { return ld - x - exponent * nl.log_abs_F(std::exp(ld - x)); };
  auto G = [&](double x) { return std::exp(logG(x)); };

  CompactSupportResult res;
  double acc = 0.0, X0 = 0.0;
  for (int k = 0; k <= kLevels; ++k) {
    double X = std::ldexp(1.0, k);
    acc += quad::integrate(G, X0, X, 1e-12);
    X0 = X;
    double lambda = -(logG(X + 0.5) - logG(X - 0.5));
    double est = acc + (lambda > 1e-2 ? G(X) / lambda : 0.0);
    if (!std::isfinite(est)) break;
    res.estimates.push_back(est);
    std::size_t m = res.estimates.size();
    if (m < 4) continue;
    bool settled = true, growing = true;
    for (std::size_t j = m - 3; j < m; ++j) {
      double a = res.estimates[j - 1], b = res.estimates[j];
      if (!(std::abs(b - a) < 1e-8 * std::abs(b))) settled = false;
      if (!(b >= 1.1 * a)) growing = false;
    }
    if (settled) {
      res.verdict = SupportVerdict::finite;
      res.value = est;
      return res;
    }
    if (growing) {
      res.verdict = SupportVerdict::infinite;
      res.value = std::numeric_limits<double>::infinity();
      return res;
    }
  }
  res.verdict = SupportVerdict::inconclusive;
  res.value = res.estimates.empty() ? std::nan("") : res.estimates.back();
  return res;
}

}  // namespace plshoot
