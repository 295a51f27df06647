#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace plshoot {

struct Parameters {
  double p;
  double n;

  Parameters(double p_, double n_);
  double p_conj() const { return p / (p - 1.0); }
};

// K, K' and the logarithmic slope r K'/K at one radius
struct WeightSample {
  double K;
  double dK;
  double slope;
  // slope = lead + rest when split; g adds p to the constant lead first so a small rest survives
  double lead = 0.0;
  double rest = 0.0;
  bool split = false;

  double g(double p) const { return split ? (p + lead) + rest : p + slope; }
};

class Weight {
 public:
  using Evaluator = std::function<WeightSample(double)>;

  static Weight constant();
  static Weight power(double theta);
  static Weight matukuma(double sigma);
  static Weight stellar(double sigma);
  // canonical form of the general power pair; p enters the scale factors
  static Weight power_general(double k, double l, double s, double sigma, double N, double p);
  static Weight power_log(double theta, double a);
  static Weight log_gaussian(double theta);
  // Hermite interpolation of log K against log r; dK may be empty
  static Weight tabulated(std::vector<double> r, std::vector<double> K, std::vector<double> dK = {});
  static Weight closure(std::string name, Evaluator eval);

  WeightSample operator()(double r) const;
  double K(double r) const { return (*this)(r).K; }
  // p + r K'/K
  double g(double r, double p) const { return (*this)(r).g(p); }

  const std::string& family() const { return family_; }
  const nlohmann::json& params() const { return params_; }

 private:
  Weight(std::string family, nlohmann::json params, Evaluator eval);

  std::string family_;
  nlohmann::json params_;
  Evaluator eval_;
};

class Nonlinearity {
 public:
  using Fn = std::function<double(double)>;

  // f(u) = u^q1 - u^q2, u0 = 1
  static Nonlinearity power_diff(double q1, double q2);
  // F defaults to quadrature of f from 0; df must be valid at least on [u0, inf)
  static Nonlinearity closure(std::string name, Fn f, Fn df, double u0, Fn F = {});

  double f(double u) const;
  // odd extension below zero, used for trial states of the integrator
  double f_odd(double u) const { return u < 0.0 ? -f(-u) : f(u); }
  double df(double u) const;
  double F(double u) const;
  double F0(double u) const { return F(u) - F_u0_; }
  double log_abs_F(double u) const;
  double u0() const { return u0_; }
  // true when df is usable below u0 (the closed-form family)
  bool smooth_below_u0() const { return smooth_below_u0_; }

  const std::string& family() const { return family_; }
  const nlohmann::json& params() const { return params_; }

 private:
  Nonlinearity() = default;

  std::string family_;
  nlohmann::json params_;
  Fn f_, df_, F_, log_abs_F_;
  double u0_ = 1.0;
  double F_u0_ = 0.0;
  bool smooth_below_u0_ = false;
};

struct ProblemModel {
  Parameters params;
  Weight weight;
  Nonlinearity nonlinearity;

  ProblemModel(Parameters p, Weight w, Nonlinearity nl);
  double u0() const { return nonlinearity.u0(); }
};

struct ModelPoint {
  double K, dK, g;
  double f, F, F0;
  std::optional<double> df;  // only reported on [u0, inf)
};

ModelPoint eval_model(const ProblemModel& model, double r, double u);

struct Witness {
  double at;
  std::string detail;
};

struct HypothesisCheck {
  std::string name;
  bool pass;
  std::optional<Witness> witness;
};

struct HypothesisReport {
  std::vector<HypothesisCheck> checks;
  std::vector<double> grid;

  bool passed() const;
  const HypothesisCheck* find(const std::string& name) const;
};

std::vector<double> log_grid(double lo, double hi, std::size_t count);
std::vector<double> default_weight_grid();
std::vector<double> default_f_grid(double u0, double u_max_factor = 100.0);

// g > 0 and non-increasing on the grid
HypothesisReport check_K1(const Weight& weight, const Parameters& params, const std::vector<double>& grid);
// sign pattern, continuity and Lipschitz bound, the (p-1) f <= f'(u-u0) bound, monotone u f'/f
HypothesisReport check_f_hypotheses(const Nonlinearity& nl, const Parameters& params,
                                    const std::vector<double>& grid);

// parameter conditions under which the general power pair satisfies K1
bool check_example_conditions(double k, double l, double N, double p);

}  // namespace plshoot
