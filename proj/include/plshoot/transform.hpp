#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "plshoot/model.hpp"
#include "plshoot/shoot.hpp"

namespace plshoot {

// log a, r a'/a, log b, r b'/b at one radius
struct PairSample {
  double log_a, slope_a, log_b, slope_b;
};

// the radial weights of -(a |u'|^{p-2} u')' = b f(u)
class GeneralWeightPair {
 public:
  using Evaluator = std::function<PairSample(double)>;

  // a = r^a_exp, b = r^b_exp (1 + r^s)^{-sigma/s}
  static GeneralWeightPair power_ab(double a_exp, double b_exp, double s, double sigma);
  // a = r^{n-1}, b = r^{n-1} / (1 + r^sigma)
  static GeneralWeightPair matukuma_ab(double n, double sigma);
  static GeneralWeightPair closure(std::string name, Evaluator eval);

  PairSample operator()(double r) const;
  double a(double r) const { return std::exp((*this)(r).log_a); }
  double b(double r) const { return std::exp((*this)(r).log_b); }

  const std::string& family() const { return family_; }
  const nlohmann::json& params() const { return params_; }

 private:
  GeneralWeightPair(std::string family, nlohmann::json params, Evaluator eval);
  std::string family_;
  nlohmann::json params_;
  Evaluator eval_;
};

struct MapRow {
  double r, t, h, K;
};

struct PulledNode {
  double r, u, du;
};

class TransformedModel {
 public:
  struct Impl;

  const ProblemModel& model() const { return model_; }
  double N() const { return model_.params.n; }
  double p() const { return model_.params.p; }

  double h(double r) const;
  double forward(double r) const;  // t = h^{-(p-1)/(N-p)}
  double inverse(double t) const;
  // dt/dr at r
  double dt_dr(double r) const;
  // K~ and its log-slope in t, evaluated at the radius r
  WeightSample K_at_r(double r) const;
  // p + t K~'/K~ through the closed form in a, b and h
  double g_identity(double r) const;

  double r_lo() const;
  double r_hi() const;
  double t_lo() const { return forward(r_lo()); }
  double t_hi() const { return forward(r_hi()); }

  // a trajectory of the transformed problem, expressed in the original radius
  std::vector<PulledNode> pull_back(const Trajectory& traj) const;
  double u_pulled(const Trajectory& traj, double r) const { return traj.u_at(forward(r)); }

  std::vector<MapRow> table(std::size_t per_decade = 8) const;
  // config with K~ tabulated in t; readable by model_from_json
  nlohmann::json config(std::size_t per_decade = 64) const;

 private:
  friend TransformedModel transform_ab_to_K(const GeneralWeightPair&, double, double, const Nonlinearity&,
                                            std::vector<double>);
  TransformedModel(std::shared_ptr<const Impl> impl, ProblemModel model);
  std::shared_ptr<const Impl> impl_;
  ProblemModel model_;
};

// grid: increasing radii for the h table; empty selects 32 points per decade on [1e-16, 1e12]
TransformedModel transform_ab_to_K(const GeneralWeightPair& pair, double p, double N, const Nonlinearity& nl,
                                   std::vector<double> grid = {});

GeneralWeightPair pair_from_json(const nlohmann::json& node);
// {"p", "N", "pair": {family, params}, "nonlinearity": {...}}
TransformedModel transform_from_json(const nlohmann::json& doc);

class QtChange {
 public:
  struct Impl;

  double t_of_r(double r) const;
  double r_of_t(double t) const;
  // r^{n-1} K^{1/p'} at r(t)
  double q(double t) const;
  // t q_t / q
  double log_slope_q(double t) const;
  // (n-p) p / g(r(t)) + p - 1
  double slope_bound(double t) const;
  double r_lo() const;
  double r_hi() const;

 private:
  friend QtChange qt_change(const ProblemModel&);
  explicit QtChange(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

QtChange qt_change(const ProblemModel& model);

enum class SupportVerdict { finite, infinite, inconclusive };
std::string to_string(SupportVerdict v);

struct CompactSupportResult {
  SupportVerdict verdict = SupportVerdict::inconclusive;
  double value = 0.0;  // infinity when the integral diverges
  std::vector<double> estimates;
  bool finite() const { return verdict == SupportVerdict::finite; }
};

// integral over (0, delta] of |F(u)|^{-exponent}
CompactSupportResult compact_support_test(const Nonlinearity& nl, double exponent = 0.5, double delta = 1e-2);

}  // namespace plshoot
