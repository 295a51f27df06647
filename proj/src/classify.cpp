#include "plshoot/classify.hpp"

#include <cmath>

#include "plshoot/error.hpp"

namespace plshoot {

std::string to_string(ShotKind k) {
  switch (k) {
    case ShotKind::Crossing: return "Crossing";
    case ShotKind::GroundCandidate: return "GroundCandidate";
    case ShotKind::Positive: return "Positive";
    case ShotKind::Inconclusive: return "Inconclusive";
  }
  return "Inconclusive";
}

ShotOutcome classify_trajectory(const ProblemModel& model, const Trajectory& traj, double eps_rel) {
  ShotOutcome out;
  out.alpha = traj.alpha();
  out.eps = eps_rel * traj.alpha();
  out.stop = traj.stop_event();
  out.r0 = traj.r0();
  out.du_r0 = traj.du_r0();
  const TrajectoryNode& end = traj.terminal();
  out.R = end.r;
  out.u_R = end.u;
  out.du_R = end.du;
  out.tail_r_du = traj.tail_r_du();
  const double eps = out.eps;

  if (traj.stop_event() == StopEvent::step_failure) {
    out.kind = ShotKind::Inconclusive;
    out.note = traj.failure();
    out.E_R = std::nan("");
    return out;
  }
  out.E_R = energy_at_node(model, end).E;

  switch (traj.stop_event()) {
    case StopEvent::u_hit_zero:
      if (end.r * std::abs(end.du) < eps) {
        out.kind = ShotKind::GroundCandidate;
      } else {
        out.kind = ShotKind::Crossing;
        out.crossing_measure = out.E_R;
      }
      break;
    case StopEvent::du_hit_zero:
      out.kind = end.u < eps ? ShotKind::GroundCandidate : ShotKind::Positive;
      break;
    case StopEvent::reached_r_max:
      out.truncated = true;
      if (out.E_R < -eps) {
        out.kind = ShotKind::Positive;
      } else if (std::abs(end.u) < eps && out.tail_r_du < eps) {
        out.kind = ShotKind::GroundCandidate;
      } else {
        out.kind = ShotKind::Inconclusive;
        out.note = "truncated with nonnegative energy";
      }
      break;
    case StopEvent::step_failure: break;
  }
  return out;
}

ShotOutcome classify(const ProblemModel& model, double alpha, const IntegratorControls& controls, double eps_rel) {
  if (!(alpha > model.u0()))
    throw DomainError("alpha <= u0: the energy starts at F(alpha) < 0 and stays negative, so no crossing exists",
                      {{"alpha", alpha}, {"u0", model.u0()}});
  return classify_trajectory(model, integrate_ivp(model, alpha, controls), eps_rel);
}

std::vector<double> alpha_grid(double lo, double hi, std::size_t count, AlphaGrid kind) {
  if (!(hi > lo) || count < 2) throw DomainError("alpha grid needs lo < hi and count >= 2", {{"lo", lo}, {"hi", hi}});
  if (kind == AlphaGrid::geometric) return log_grid(lo, hi, count);
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i) g[i] = lo + (hi - lo) * double(i) / double(count - 1);
  g.back() = hi;
  return g;
}

std::vector<ShotOutcome> classify_many(const ProblemModel& model, const std::vector<double>& alphas,
                                       const IntegratorControls& controls, unsigned threads) {
  return parallel_map<ShotOutcome>(alphas.size(), threads, [&](std::size_t i) {
    try {
      return classify(model, alphas[i], controls);
    } catch (const std::exception& e) {
      ShotOutcome s;
      s.alpha = alphas[i];
      s.eps = kClassRelTol * alphas[i];
      s.note = e.what();
      s.E_R = std::nan("");
      return s;
    }
  });
}

std::vector<ShotOutcome> sweep(const ProblemModel& model, double lo, double hi, std::size_t count,
                               const IntegratorControls& controls, AlphaGrid kind, unsigned threads) {
  if (!(lo > model.u0())) throw DomainError("sweep needs u0 < alpha_lo", {{"lo", lo}, {"u0", model.u0()}});
  return classify_many(model, alpha_grid(lo, hi, count, kind), controls, threads);
}

nlohmann::json to_json(const ShotOutcome& s) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    if (v && std::isfinite(*v)) return *v;
    return nullptr;
  };
  auto num = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return nullptr;
  };
  return {{"alpha", s.alpha},
          {"kind", to_string(s.kind)},
          {"R", num(s.R)},
          {"u_R", num(s.u_R)},
          {"du_R", num(s.du_R)},
          {"E_R", num(s.E_R)},
          {"r0", opt(s.r0)},
          {"du_r0", opt(s.du_r0)},
          {"crossing_measure", opt(s.crossing_measure)},
          {"truncated", s.truncated},
          {"stop_event", to_string(s.stop)},
          {"tail_r_du", num(s.tail_r_du)},
          {"eps_class", s.eps},
          {"note", s.note}};
}

}  // namespace plshoot
