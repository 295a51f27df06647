#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "plshoot/model.hpp"
#include "plshoot/parallel.hpp"
#include "plshoot/shoot.hpp"

namespace plshoot {

enum class ShotKind { Crossing, GroundCandidate, Positive, Inconclusive };
std::string to_string(ShotKind k);

struct ShotOutcome {
  double alpha = 0.0;
  ShotKind kind = ShotKind::Inconclusive;
  double R = 0.0;
  double u_R = 0.0;
  double du_R = 0.0;
  double E_R = 0.0;
  std::optional<double> r0;
  std::optional<double> du_r0;
  std::optional<double> crossing_measure;
  bool truncated = false;
  StopEvent stop = StopEvent::step_failure;
  double tail_r_du = 0.0;
  double eps = 0.0;  // classification tolerance used
  std::string note;
};

inline constexpr double kClassRelTol = 1e-8;

ShotOutcome classify_trajectory(const ProblemModel& model, const Trajectory& traj, double eps_rel = kClassRelTol);
ShotOutcome classify(const ProblemModel& model, double alpha, const IntegratorControls& controls = {},
                     double eps_rel = kClassRelTol);

enum class AlphaGrid { geometric, linear };
std::vector<double> alpha_grid(double lo, double hi, std::size_t count, AlphaGrid kind = AlphaGrid::geometric);

// order of results matches the grid; failures become Inconclusive
std::vector<ShotOutcome> sweep(const ProblemModel& model, double lo, double hi, std::size_t count,
                               const IntegratorControls& controls = {}, AlphaGrid kind = AlphaGrid::geometric,
                               unsigned threads = default_threads());
std::vector<ShotOutcome> classify_many(const ProblemModel& model, const std::vector<double>& alphas,
                                       const IntegratorControls& controls, unsigned threads);

nlohmann::json to_json(const ShotOutcome& s);

}  // namespace plshoot
