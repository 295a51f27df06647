#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "plshoot/classify.hpp"
#include "plshoot/model.hpp"
#include "plshoot/shoot.hpp"

namespace plshoot {

struct BracketResult {
  double alpha_lo = 0.0;  // Positive
  double alpha_hi = 0.0;  // Crossing
  double width = 0.0;
  int iterations = 0;
  bool converged = false;
  // every endpoint update came from a certified Positive or Crossing shot
  bool invariant_held = true;
  std::vector<double> widths;   // after each iteration
  std::vector<double> flagged;  // inconclusive midpoints pushed to the Positive side
  ShotOutcome best_candidate;   // at the final midpoint
};

BracketResult find_ground_state(const ProblemModel& model, double alpha_lo, double alpha_hi, double tol_alpha,
                                const IntegratorControls& controls = {});

struct ScanResult {
  std::vector<ShotOutcome> outcomes;
  // index pairs (i, j), i < j, of consecutive decided shots whose kinds differ
  std::vector<std::pair<std::size_t, std::size_t>> transitions;
  // first Positive -> Crossing pair, if any
  std::optional<std::pair<double, double>> bracket;
};

// Positive/Crossing changes along the list, skipping GroundCandidate and Inconclusive shots
std::vector<std::pair<std::size_t, std::size_t>> kind_transitions(const std::vector<ShotOutcome>& outcomes);

ScanResult scan_for_bracket(const ProblemModel& model, double lo, double hi, std::size_t count,
                            const IntegratorControls& controls = {}, unsigned threads = default_threads());

struct DirichletResult {
  double alpha = 0.0;
  double R = 0.0;
  int iterations = 0;
  Trajectory trajectory;
};

// alpha with R(alpha) = R_target, by bisection on the decreasing map alpha -> R(alpha) over crossing shots
DirichletResult solve_dirichlet(const ProblemModel& model, double R_target, double alpha_seed, double tol,
                                const IntegratorControls& controls = {});

struct SuiteCheck {
  std::string name;
  bool pass = true;
  bool informational = false;  // does not count toward the suite verdict
  std::vector<Witness> witnesses;
  double delta_tested = 0.0;
};

struct SuiteReport {
  std::vector<SuiteCheck> checks;
  double alpha_lo = 0.0, alpha_hi = 0.0;
  double delta = 0.0;
  std::vector<ShotOutcome> above, below;

  bool passed() const;
  const SuiteCheck* find(const std::string& name) const;
};

SuiteReport verify_suite(const ProblemModel& model, const BracketResult& bracket, double delta_rel = 1e-2,
                         std::size_t samples = 8, const IntegratorControls& controls = {},
                         unsigned threads = default_threads());

nlohmann::json to_json(const BracketResult& b);
nlohmann::json to_json(const SuiteReport& r);

}  // namespace plshoot
