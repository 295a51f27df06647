#include "plshoot/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "plshoot/classify.hpp"
#include "plshoot/config.hpp"
#include "plshoot/error.hpp"
#include "plshoot/transform.hpp"
#include "plshoot/uniqueness.hpp"
#include "plshoot/variational.hpp"

namespace plshoot::cli {

namespace {

using nlohmann::json;

void emit(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json opt_num(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

std::string csv_row(std::initializer_list<std::string> cols) {
  std::string s;
  bool first = true;
  for (const auto& c : cols) {
    if (!first) s += ',';
    s += c;
    first = false;
  }
  return s + "\n";
}

std::string fd(double v) { return format_double(v); }
std::string fd(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

// LO:HI:N
struct Range {
  double lo = 0.0, hi = 0.0;
  std::size_t count = 0;
};

Range parse_range(const std::string& text) {
  std::stringstream ss(text);
  std::string a, b, c;
  if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c) || a.empty() || b.empty() ||
      c.empty())
    throw UsageError("range must look like LO:HI:N", {{"range", text}});
  try {
    std::size_t used = 0;
    Range r;
    r.lo = std::stod(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    r.hi = std::stod(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
    long n = std::stol(c, &used);
    if (used != c.size() || n < 2) throw std::invalid_argument(c);
    r.count = std::size_t(n);
    return r;
  } catch (const std::logic_error&) {
    throw UsageError("range must look like LO:HI:N with N >= 2", {{"range", text}});
  }
}

struct Common {
  std::string config;
  unsigned threads = default_threads();
  double rel_tol = 0.0;
  double r_max = 0.0;
};

IntegratorControls controls_of(const Common& c) {
  IntegratorControls k;
  if (c.rel_tol > 0.0) {
    k.rel_tol = c.rel_tol;
    k.abs_tol = std::min(k.abs_tol, 1e-2 * c.rel_tol);
  }
  if (c.r_max > 0.0) k.r_max = c.r_max;
  k.validate();
  return k;
}

void add_common(CLI::App* sub, Common& c, bool integrator = true) {
  sub->add_option("--config", c.config, "model config (JSON)")->required();
  sub->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  if (integrator) {
    sub->add_option("--rel-tol", c.rel_tol, "integrator relative tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--rmax", c.r_max, "truncation radius")->check(CLI::PositiveNumber);
  }
}

json hypotheses_json(const ProblemModel& m) {
  HypothesisReport k = check_K1(m.weight, m.params, default_weight_grid());
  HypothesisReport f = check_f_hypotheses(m.nonlinearity, m.params, default_f_grid(m.u0()));
  return {{"pass", k.passed() && f.passed()}, {"weight", to_json(k)}, {"nonlinearity", to_json(f)}};
}

std::string trajectory_csv(const ProblemModel& m, const Trajectory& t) {
  std::string s = "r,u,du,m,E\n";
  for (const auto& nd : t.nodes())
    s += csv_row({fd(nd.r), fd(nd.u), fd(nd.du), fd(nd.m), fd(energy_at_node(m, nd).E)});
  return s;
}

json trajectory_summary(const ProblemModel& m, const Trajectory& t) {
  ShotOutcome o = classify_trajectory(m, t);
  return {{"alpha", t.alpha()},
          {"stop_event", to_string(t.stop_event())},
          {"R", t.R()},
          {"r0", opt_num(t.r0())},
          {"du_r0", opt_num(t.du_r0())},
          {"steps", t.steps()},
          {"nodes", t.nodes().size()},
          {"startup_radius", t.startup_radius()},
          {"failure", t.failure()},
          {"rel_tol", t.controls().rel_tol},
          {"abs_tol", t.controls().abs_tol},
          {"r_max", t.controls().r_max},
          {"outcome", to_json(o)}};
}

std::string outcomes_csv(const std::vector<ShotOutcome>& v) {
  std::string s = "alpha,kind,R,u_R,du_R,E_R,r0,crossing_measure\n";
  for (const auto& o : v)
    s += csv_row({fd(o.alpha), to_string(o.kind), fd(o.R), fd(o.u_R), fd(o.du_R), fd(o.E_R), fd(o.r0),
                  fd(o.crossing_measure)});
  return s;
}

json check_json(const std::string& name, bool pass, json witnesses = json::array(), double delta = 0.0) {
  return {{"name", name}, {"pass", pass}, {"informational", false}, {"witnesses", witnesses}, {"delta_tested", delta}};
}

int run_app(int argc, char** argv) {
  CLI::App app{"shooting solver and verification suite for radial quasilinear equations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "plshoot 1.0");

  // check
  Common ck;
  std::string ck_out = "-";
  auto* sc = app.add_subcommand("check", "certify the weight and nonlinearity hypotheses");
  add_common(sc, ck, false);
  sc->add_option("--out", ck_out, "report path, - for stdout");

  // integrate
  Common in;
  double in_alpha = 0.0, in_tol = 0.0, in_rmax = 0.0;
  std::string in_out, in_summary;
  auto* si = app.add_subcommand("integrate", "integrate one shot and write its trajectory");
  si->add_option("--config", in.config, "model config (JSON)")->required();
  si->add_option("--alpha", in_alpha, "initial height")->required();
  si->add_option("--tol", in_tol, "relative tolerance")->check(CLI::PositiveNumber);
  si->add_option("--rmax", in_rmax, "truncation radius")->check(CLI::PositiveNumber);
  si->add_option("--out", in_out, "trajectory CSV, - for stdout")->required();
  si->add_option("--summary", in_summary, "summary JSON (default: <out>.json)");

  // classify
  Common cl;
  std::optional<double> cl_alpha;
  std::string cl_range, cl_out;
  bool cl_linear = false, cl_quiet = false;
  auto* scl = app.add_subcommand("classify", "classify shots as crossing, ground candidate or positive");
  add_common(scl, cl);
  auto* o_alpha = scl->add_option("--alpha", cl_alpha, "single initial height");
  auto* o_range = scl->add_option("--alpha-range", cl_range, "LO:HI:N");
  o_alpha->excludes(o_range);
  scl->add_flag("--linear", cl_linear, "linear instead of geometric spacing");
  scl->add_flag("--quiet", cl_quiet, "no JSON records on the output stream");
  scl->add_option("--out", cl_out, "CSV path, - for stdout");

  // ground-state
  Common gs;
  std::vector<double> gs_bracket;
  std::string gs_scan, gs_out = "-";
  double gs_tol = 1e-8;
  auto* sg = app.add_subcommand("ground-state", "bisect the Positive/Crossing transition");
  add_common(sg, gs);
  auto* o_br = sg->add_option("--bracket", gs_bracket, "LO HI")->expected(2);
  auto* o_sc = sg->add_option("--scan", gs_scan, "LO:HI:N sweep to locate a bracket");
  o_br->excludes(o_sc);
  sg->add_option("--tol", gs_tol, "bracket width")->check(CLI::PositiveNumber);
  sg->add_option("--out", gs_out, "JSON path, - for stdout");

  // dirichlet
  Common di;
  double di_radius = 0.0, di_seed = 0.0, di_tol = 1e-10;
  std::string di_out = "-", di_traj;
  auto* sd = app.add_subcommand("dirichlet", "find alpha with R(alpha) equal to a given radius");
  add_common(sd, di);
  sd->add_option("--radius", di_radius, "target radius")->required()->check(CLI::PositiveNumber);
  sd->add_option("--seed", di_seed, "initial height of a crossing shot")->required();
  sd->add_option("--tol", di_tol, "tolerance on R")->check(CLI::PositiveNumber);
  sd->add_option("--out", di_out, "JSON path, - for stdout");
  sd->add_option("--trajectory", di_traj, "trajectory CSV of the solution");

  // variational
  Common va;
  double va_alpha = 0.0;
  std::optional<double> va_fd;
  std::string va_out, va_report = "-";
  auto* sv = app.add_subcommand("variational", "derivative of the shot with respect to alpha");
  add_common(sv, va);
  sv->add_option("--alpha", va_alpha, "initial height")->required();
  sv->add_option("--out", va_out, "CSV r,phi,dphi,theta")->required();
  sv->add_option("--fd-check", va_fd, "finite-difference step relative to alpha")->check(CLI::PositiveNumber);
  sv->add_option("--report", va_report, "JSON path, - for stdout");

  // transform
  std::string tr_config, tr_out, tr_table;
  auto* st = app.add_subcommand("transform", "rewrite an (a, b) weight pair as a K-form model");
  st->add_option("--config", tr_config, "transform config (JSON)")->required();
  st->add_option("--out", tr_out, "model config path, - for stdout")->required();
  st->add_option("--table", tr_table, "CSV r,t,h,K");

  // verify
  Common ve;
  std::string ve_suite = "all", ve_report = "-", ve_scan;
  std::vector<double> ve_bracket;
  double ve_delta = 1e-2, ve_tol = 1e-8;
  std::size_t ve_samples = 8;
  auto* sver = app.add_subcommand("verify", "run the verification suite");
  add_common(sver, ve);
  sver->add_option("--suite", ve_suite, "suite name")->check(CLI::IsMember({"all"}));
  sver->add_option("--report", ve_report, "JSON path, - for stdout");
  auto* v_br = sver->add_option("--bracket", ve_bracket, "LO HI")->expected(2);
  auto* v_sc = sver->add_option("--scan", ve_scan, "LO:HI:N sweep (default 1.01 u0 : 50 u0 : 64)");
  v_br->excludes(v_sc);
  sver->add_option("--delta", ve_delta, "relative neighbourhood")->check(CLI::PositiveNumber);
  sver->add_option("--samples", ve_samples, "samples per side")->check(CLI::PositiveNumber);
  sver->add_option("--tol", ve_tol, "bracket width")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  if (*sc) {
    ProblemModel m = load_model(ck.config);
    json rep = hypotheses_json(m);
    emit(ck_out, dump(rep));
    return rep["pass"].get<bool>() ? 0 : 3;
  }

  if (*si) {
    ProblemModel m = load_model(in.config);
    Common c = in;
    c.rel_tol = in_tol;
    c.r_max = in_rmax;
    Trajectory t = integrate_ivp(m, in_alpha, controls_of(c));
    emit(in_out, trajectory_csv(m, t));
    std::string side = !in_summary.empty() ? in_summary : (in_out == "-" ? std::string() : in_out + ".json");
    if (!side.empty()) emit(side, dump(trajectory_summary(m, t)));
    if (t.stop_event() == StopEvent::step_failure)
      throw DomainError("integration failed: " + t.failure(), {{"alpha", in_alpha}, {"r", t.R()}});
    return 0;
  }

  if (*scl) {
    ProblemModel m = load_model(cl.config);
    IntegratorControls k = controls_of(cl);
    std::vector<ShotOutcome> outs;
    if (cl_alpha) {
      outs.push_back(classify(m, *cl_alpha, k));
    } else if (!cl_range.empty()) {
      Range r = parse_range(cl_range);
      outs = sweep(m, r.lo, r.hi, r.count, k, cl_linear ? AlphaGrid::linear : AlphaGrid::geometric, cl.threads);
    } else {
      throw UsageError("classify needs --alpha or --alpha-range");
    }
    if (cl_out != "-" && !cl_quiet) {
      std::string lines;
      for (const auto& o : outs) lines += to_json(o).dump() + "\n";
      std::cout << lines << std::flush;
    }
    if (!cl_out.empty()) emit(cl_out, outcomes_csv(outs));
    return 0;
  }

  if (*sg) {
    ProblemModel m = load_model(gs.config);
    IntegratorControls k = controls_of(gs);
    json doc;
    double lo, hi;
    if (gs_bracket.size() == 2) {
      lo = gs_bracket[0];
      hi = gs_bracket[1];
    } else {
      Range r = gs_scan.empty() ? Range{1.01 * m.u0(), 50.0 * m.u0(), 64} : parse_range(gs_scan);
      ScanResult S = scan_for_bracket(m, r.lo, r.hi, r.count, k, gs.threads);
      doc["scan"] = {{"lo", r.lo}, {"hi", r.hi}, {"count", r.count}, {"transitions", S.transitions.size()}};
      if (!S.bracket) throw DomainError("no Positive to Crossing transition in the scan", {{"lo", r.lo}, {"hi", r.hi}});
      lo = S.bracket->first;
      hi = S.bracket->second;
    }
    BracketResult B = find_ground_state(m, lo, hi, gs_tol, k);
    doc["bracket"] = to_json(B);
    emit(gs_out, dump(doc));
    if (!B.invariant_held) return 3;
    if (!B.converged) throw DomainError("bisection stopped before reaching the requested width", {{"width", B.width}});
    return 0;
  }

  if (*sd) {
    ProblemModel m = load_model(di.config);
    DirichletResult D = solve_dirichlet(m, di_radius, di_seed, di_tol, controls_of(di));
    json doc = {{"R_target", di_radius},
                {"alpha", D.alpha},
                {"R", D.R},
                {"iterations", D.iterations},
                {"du_R", D.trajectory.terminal().du},
                {"stop_event", to_string(D.trajectory.stop_event())}};
    emit(di_out, dump(doc));
    if (!di_traj.empty()) emit(di_traj, trajectory_csv(m, D.trajectory));
    return 0;
  }

  if (*sv) {
    ProblemModel m = load_model(va.config);
    IntegratorControls k = controls_of(va);
    Trajectory t = integrate_ivp(m, va_alpha, k);
    VariationalState V = solve_variational(m, t);
    std::string csv = "r,phi,dphi,theta\n";
    for (const auto& nd : V.nodes()) csv += csv_row({fd(nd.r), fd(nd.phi), fd(nd.dphi), fd(nd.theta)});
    emit(va_out, csv);
    AlphaDerivatives D = alpha_derivatives(m, va_alpha, k);
    json rep = {{"alpha", va_alpha},
                {"r0", D.r0},
                {"du_r0", D.du_r0},
                {"phi_r0", D.phi_r0},
                {"dphi_r0", D.dphi_r0},
                {"dr0_dalpha", D.dr0_dalpha},
                {"d_r0du_dalpha", D.d_r0du_dalpha},
                {"identity_lhs", D.identity_lhs},
                {"identity_rhs", D.identity_rhs},
                {"aligned", V.aligned()},
                {"startup_shrinks", V.startup_shrinks()}};
    if (va_fd) {
      // finite differences need the tighter tolerance to resolve a 1e-6 relative step
      IntegratorControls kf = k;
      kf.rel_tol = std::min(k.rel_tol, 1e-12);
      kf.abs_tol = std::min(k.abs_tol, 1e-14);
      FiniteDifferenceCheck F = fd_check(m, va_alpha, *va_fd * va_alpha, kf);
      rep["fd_check"] = {{"h", F.h},
                         {"rel_tol", kf.rel_tol},
                         {"phi_rel_err", F.phi_rel_err},
                         {"points", F.points},
                         {"dr0_fd", F.dr0_fd},
                         {"dr0_var", F.dr0_var},
                         {"dr0_rel_err", F.dr0_rel_err}};
    }
    emit(va_report, dump(rep));
    return 0;
  }

  if (*st) {
    TransformedModel T = transform_from_json(read_json_file(tr_config));
    emit(tr_out, dump(T.config()));
    if (!tr_table.empty()) {
      std::string csv = "r,t,h,K\n";
      for (const auto& row : T.table()) csv += csv_row({fd(row.r), fd(row.t), fd(row.h), fd(row.K)});
      emit(tr_table, csv);
    }
    return 0;
  }

  if (*sver) {
    ProblemModel m = load_model(ve.config);
    IntegratorControls k = controls_of(ve);
    json checks = json::array();
    bool pass = true;
    auto add = [&](json c) {
      if (!c["informational"].get<bool>() && !c["pass"].get<bool>()) pass = false;
      checks.push_back(std::move(c));
    };

    json hyp = hypotheses_json(m);
    json hw = json::array();
    for (const char* part : {"weight", "nonlinearity"})
      for (const auto& c : hyp[part]["checks"])
        if (!c["pass"].get<bool>()) hw.push_back({{"at", c["witness"]["at"]}, {"detail", c["name"].get<std::string>() + ": " + c["witness"]["detail"].get<std::string>()}});
    add(check_json("hypotheses", hyp["pass"].get<bool>(), hw));

    double lo, hi;
    json doc;
    if (ve_bracket.size() == 2) {
      lo = ve_bracket[0];
      hi = ve_bracket[1];
    } else {
      Range r = ve_scan.empty() ? Range{1.01 * m.u0(), 50.0 * m.u0(), 64} : parse_range(ve_scan);
      ScanResult S = scan_for_bracket(m, r.lo, r.hi, r.count, k, ve.threads);
      json w = json::array();
      if (S.transitions.size() != 1) w.push_back({{"at", r.lo}, {"detail", std::to_string(S.transitions.size()) + " transitions"}});
      add(check_json("scan_single_transition", S.transitions.size() == 1 && S.bracket.has_value(), w));
      if (!S.bracket) {
        doc = {{"pass", false}, {"checks", checks}};
        emit(ve_report, dump(doc));
        return 3;
      }
      lo = S.bracket->first;
      hi = S.bracket->second;
    }
    BracketResult B = find_ground_state(m, lo, hi, ve_tol, k);
    {
      json w = json::array();
      for (double f : B.flagged) w.push_back({{"at", f}, {"detail", "inconclusive midpoint assigned to the Positive side"}});
      if (!B.converged) w.push_back({{"at", B.alpha_hi}, {"detail", "width " + format_double(B.width)}});
      add(check_json("bisection", B.converged && B.invariant_held, w));
    }
    SuiteReport R = verify_suite(m, B, ve_delta, ve_samples, k, ve.threads);
    json suite = to_json(R);
    for (const auto& c : suite["checks"]) add(c);
    {
      double top = 100.0 * B.alpha_hi;
      auto outs = sweep(m, m.u0() * (1.0 + 1e-3), top, 256, k, AlphaGrid::geometric, ve.threads);
      auto tr = kind_transitions(outs);
      json w = json::array();
      for (auto [i, j] : tr)
        w.push_back({{"at", outs[j].alpha}, {"detail", to_string(outs[i].kind) + " -> " + to_string(outs[j].kind)}});
      add(check_json("unique_transition", tr.size() == 1, tr.size() == 1 ? json::array() : w));
    }
    doc = {{"pass", pass}, {"bracket", to_json(B)}, {"checks", checks}};
    emit(ve_report, dump(doc));
    return pass ? 0 : 3;
  }
  throw UsageError("no subcommand given");
}

void report_error(int code, const std::string& message, const json& witness) {
  json j = {{"code", code}, {"message", message}, {"witness", witness}};
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int run(int argc, char** argv) {
  try {
    return run_app(argc, argv);
  } catch (const Error& e) {
    report_error(int(e.code()), e.what(), e.witness());
    return int(e.code());
  } catch (const nlohmann::json::exception& e) {
    report_error(int(ErrorCode::usage), e.what(), nullptr);
    return int(ErrorCode::usage);
  } catch (const std::exception& e) {
    report_error(int(ErrorCode::domain), e.what(), nullptr);
    return int(ErrorCode::domain);
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> copy = args;
  std::vector<char*> argv;
  for (auto& s : copy) argv.push_back(s.data());
  argv.push_back(nullptr);
  return run(int(copy.size()), argv.data());
}

}  // namespace plshoot::cli
