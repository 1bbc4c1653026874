#include "rigid_recover/cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <optional>

#include "rigid_recover/feasibility.hpp"
#include "rigid_recover/ortho_solver.hpp"
#include "rigid_recover/persp_solver.hpp"
#include "rigid_recover/scene_io.hpp"
#include "rigid_recover/synth.hpp"

#ifndef RIGID_RECOVER_VERSION
#define RIGID_RECOVER_VERSION "0.0.0"
#endif

namespace rigid {

using nlohmann::json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoSolution:
    case ErrorCode::NoConvergence:
    case ErrorCode::IllConditioned:
    case ErrorCode::FamilyBreak:
    case ErrorCode::NonPositiveLengths:
    case ErrorCode::InconsistentLengths:
    case ErrorCode::MirrorMismatch:
      return kExitSolver;
    default:
      return kExitInput;
  }
}

namespace {

struct Common {
  std::string out_path;
  bool as_json = false;
  std::uint64_t seed = 0x5eed;
};

std::uint64_t effective_seed(std::uint64_t flag) {
  const char* env = std::getenv("RIGID_RECOVER_SEED");
  if (!env || !*env) return flag;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(env, &used, 0);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, fmt::format("RIGID_RECOVER_SEED is not an integer: '{}'", env));
  }
}

json error_json(const Error& e) { return {{"code", std::string(to_string(e.code()))}, {"message", e.what()}}; }

json structure_json(const RigidBodyModel& body, int frame) {
  return {{"frame", frame}, {"points", body_to_json(body)}};
}

json ortho_solution_json(const RecoveryResult& r) {
  json lengths = json::object();
  for (const auto& [k, v] : r.lengths.entries()) lengths[k.name()] = v;
  json s = {{"lengths", lengths},
            {"structures", json::array()},
            {"motions", json::array()},
            {"mirror_flag", r.mirror_flag},
            {"mirror_structures", json::array()},
            {"mirror_motions", json::array()},
            {"residual", r.residual},
            {"isolated", r.isolated}};
  for (std::size_t i = 0; i < r.structures.size(); ++i) {
    s["structures"].push_back(structure_json(r.structures[i], static_cast<int>(i + 1)));
  }
  for (const auto& m : r.motions) s["motions"].push_back(pose_to_json(m));
  for (std::size_t i = 0; i < r.mirror_structures.size(); ++i) {
    s["mirror_structures"].push_back(structure_json(r.mirror_structures[i], static_cast<int>(i + 1)));
  }
  for (const auto& m : r.mirror_motions) s["mirror_motions"].push_back(pose_to_json(m));
  return s;
}

json vars_json(const MeetVariables& v) {
  return {{"theta1", v.pose.theta1},
          {"theta2", v.pose.theta2},
          {"phi2", v.pose.phi2},
          {"t_first", v.lines.first},
          {"t_second", v.lines.second}};
}

const char* handed_name(Handedness h) { return h == Handedness::Proper ? "proper" : "reflected"; }

json persp_solution_json(const PerspectiveSolution& s) {
  return {{"body", body_to_json(s.body)},
          {"camera1", pose_to_json(s.camera1)},
          {"camera2", pose_to_json(s.camera2)},
          {"relative", pose_to_json(s.relative)},
          {"vars", vars_json(s.vars)},
          {"handedness", {handed_name(s.handedness.first), handed_name(s.handedness.second)}},
          {"residual", s.residual}};
}

class Reporter {
 public:
  Reporter(std::string command, json config, std::uint64_t seed)
      : start_(std::chrono::steady_clock::now()) {
    report_["schema_version"] = "1";
    report_["run"] = {{"command", std::move(command)},
                      {"config", std::move(config)},
                      {"seed", seed},
                      {"tool_version", RIGID_RECOVER_VERSION}};
  }

  // Writes the report to --out and, with --json, to out.
  void finish(json results, const Common& c, std::ostream& out) {
    report_["results"] = std::move(results);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    report_["timing"] = {{"seconds", secs}};
    const std::string text = dump_canonical(report_);
    if (!c.out_path.empty()) {
      std::ofstream f(c.out_path, std::ios::binary);
      if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + c.out_path);
      f << text;
    }
    if (c.as_json) out << text;
  }

 private:
  json report_;
  std::chrono::steady_clock::time_point start_;
};

void add_common(CLI::App* sub, Common& c, bool with_seed) {
  sub->add_option("--out", c.out_path, "write the JSON report here");
  sub->add_flag("--json", c.as_json, "print the JSON report instead of a table");
  if (with_seed) sub->add_option("--seed", c.seed, "seed (RIGID_RECOVER_SEED overrides)");
}

// ---- feasibility

struct FeasArgs {
  int points = 0, lines = 0, frames = 0;
  std::string projection = "perspective";
  bool paper_table = false;
  Common common;
};

int cmd_feasibility(const FeasArgs& a, std::ostream& out) {
  std::vector<ProblemInstance> insts;
  if (a.paper_table) {
    insts = reference_instances();
  } else {
    if (a.frames < 1) throw Error(ErrorCode::InvalidArgument, "--frames is required (or --paper-table)");
    insts.push_back({a.points, a.lines, a.frames, projection_from_string(a.projection)});
  }
  const auto rows = feasibility_table(insts);
  if (a.common.as_json || !a.common.out_path.empty()) {
    json res = json::array();
    for (const auto& r : rows) {
      res.push_back({{"points", r.instance.points},
                     {"lines", r.instance.lines},
                     {"frames", r.instance.frames},
                     {"projection", to_string(r.instance.projection)},
                     {"dof", r.dof},
                     {"info", r.info},
                     {"margin", r.margin},
                     {"verdict", to_string(r.verdict)}});
    }
    Reporter rep("feasibility", {{"paper_table", a.paper_table}}, 0);
    rep.finish(res, a.common, out);
  }
  if (!a.common.as_json) {
    out << fmt::format("{:>6} {:>5} {:>6} {:<11} {:>4} {:>4} {:>6}  {}\n", "points", "lines", "frames", "projection",
                       "dof", "info", "margin", "verdict");
    for (const auto& r : rows) {
      out << fmt::format("{:>6} {:>5} {:>6} {:<11} {:>4} {:>4} {:>+6}  {}\n", r.instance.points, r.instance.lines,
                         r.instance.frames, to_string(r.instance.projection), r.dof, r.info, r.margin,
                         to_string(r.verdict));
    }
  }
  return kExitOk;
}

// ---- synth

struct SynthArgs {
  SynthSpec spec;
  std::string projection = "orthogonal";
  Common common;
};

int cmd_synth(SynthArgs a, std::ostream& out) {
  a.spec.projection = projection_from_string(a.projection);
  a.spec.seed = effective_seed(a.common.seed);
  const Scene scene = generate(a.spec);
  const std::string text = dump_scene(scene_file_from(scene));
  if (a.common.out_path.empty()) {
    out << text;
    return kExitOk;
  }
  std::ofstream f(a.common.out_path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + a.common.out_path);
  f << text;
  if (a.common.as_json) {
    out << text;
  } else {
    out << fmt::format("wrote {} ({} points, {} frames, {}, seed {})\n", a.common.out_path, a.spec.n_points,
                       a.spec.n_frames, a.projection, a.spec.seed);
  }
  return kExitOk;
}

// ---- recover-ortho

struct OrthoArgs {
  std::string config;
  std::string scene;
  Common common;
};

int cmd_recover_ortho(const OrthoArgs& a, std::ostream& out, std::ostream& err) {
  const OrthoConfig cfg = ortho_config_from_string(a.config);
  const SceneFile scene = load_scene(a.scene);
  const std::uint64_t seed = effective_seed(a.common.seed);
  Reporter rep("recover-ortho", {{"config", a.config}, {"scene", a.scene}}, seed);
  QuadraticSolveOptions opts;
  opts.seed = seed;
  json res = {{"solver", a.config}};
  int code = kExitOk;
  std::vector<RecoveryResult> sols;
  try {
    switch (cfg) {
      case OrthoConfig::P3F3: sols = solve_p3f3(scene.observations, opts); break;
      case OrthoConfig::P4F2: sols = solve_p4f2(scene.observations, opts); break;
      default: sols = recover_orthogonal(cfg, scene.observations);
    }
    res["status"] = "ok";
    res["solutions"] = json::array();
    for (const auto& s : sols) res["solutions"].push_back(ortho_solution_json(s));
  } catch (const Error& e) {
    res["status"] = "error";
    res["error"] = error_json(e);
    code = exit_code_for(e.code());
    err << e.what() << "\n";
  }
  rep.finish(res, a.common, out);
  if (!a.common.as_json && code == kExitOk) {
    out << fmt::format("{}: {} solution(s)\n", a.config, sols.size());
    for (std::size_t i = 0; i < sols.size(); ++i) {
      out << fmt::format("  #{} residual {:.3e} isolated {} mirror {}\n", i + 1, sols[i].residual,
                         sols[i].isolated ? "yes" : "no", sols[i].mirror_flag ? "yes" : "no");
      for (const auto& [k, v] : sols[i].lengths.entries()) {
        out << fmt::format("      {:<8} L^2 = {:.12g}\n", k.name(), v);
      }
    }
  }
  return code;
}

// ---- recover-persp

struct PerspArgs {
  std::string scene;
  Common common;
};

std::pair<const FrameObservation*, const FrameObservation*> two_frames(const SceneFile& s) {
  if (s.projection != ProjectionKind::Perspective) {
    throw Error(ErrorCode::WrongKind, "scene must hold perspective observations");
  }
  if (s.observations.size() != 2) throw Error(ErrorCode::InvalidArgument, "scene must hold exactly two frames");
  return {&s.observations[0], &s.observations[1]};
}

int cmd_recover_persp(const PerspArgs& a, std::ostream& out, std::ostream& err) {
  const SceneFile scene = load_scene(a.scene);
  const auto [first, second] = two_frames(scene);
  Reporter rep("recover-persp", {{"scene", a.scene}}, effective_seed(a.common.seed));
  json res;
  int code = kExitOk;
  std::vector<PerspectiveSolution> sols;
  try {
    sols = solve_five_point_two_frame(*first, *second);
    res["status"] = "ok";
    res["solutions"] = json::array();
    for (const auto& s : sols) res["solutions"].push_back(persp_solution_json(s));
  } catch (const Error& e) {
    res["status"] = "error";
    res["error"] = error_json(e);
    if (e.value()) res["error"]["best_residual"] = *e.value();
    code = exit_code_for(e.code());
    err << e.what() << "\n";
  }
  rep.finish(res, a.common, out);
  if (!a.common.as_json && code == kExitOk) {
    out << fmt::format("{} solution(s)\n", sols.size());
    out << fmt::format("  {:>3} {:>10} {:>10} {:>10} {:>10}  {}\n", "#", "theta1", "theta2", "phi2", "residual",
                       "branch");
    for (std::size_t i = 0; i < sols.size(); ++i) {
      const auto& s = sols[i];
      out << fmt::format("  {:>3} {:>10.6f} {:>10.6f} {:>10.6f} {:>10.2e}  {}/{}\n", i + 1, s.vars.pose.theta1,
                         s.vars.pose.theta2, s.vars.pose.phi2, s.residual, handed_name(s.handedness.first),
                         handed_name(s.handedness.second));
    }
  }
  return code;
}

// ---- ambiguity

struct AmbArgs {
  std::string scene;
  std::optional<double> theta_center;
  double theta_span = 0.05;
  int grid_points = 11;
  Common common;
};

int cmd_ambiguity(const AmbArgs& a, std::ostream& out, std::ostream& err) {
  const SceneFile scene = load_scene(a.scene);
  const auto [first, second] = two_frames(scene);
  if (a.grid_points < 1) throw Error(ErrorCode::InvalidArgument, "--grid-points must be positive");
  if (!(a.theta_span >= 0.0)) throw Error(ErrorCode::InvalidArgument, "--theta-span must be non-negative");
  double center = 0.0;
  if (a.theta_center) {
    center = *a.theta_center;
  } else {
    if (!scene.body || scene.poses.size() < 2) {
      throw Error(ErrorCode::InvalidArgument, "scene carries no ground truth; pass --theta-center");
    }
    center = anchor_scene(*scene.body, scene.poses[0], scene.poses[1], default_meet_labels(*first)).vars.pose.theta1;
  }
  std::vector<double> grid;
  for (int i = 0; i < a.grid_points; ++i) {
    const double u = a.grid_points == 1 ? 0.0 : 2.0 * i / (a.grid_points - 1) - 1.0;
    grid.push_back(center + a.theta_span * u);
  }
  Reporter rep("ambiguity",
               {{"scene", a.scene}, {"theta_center", center}, {"theta_span", a.theta_span},
                {"grid_points", a.grid_points}},
               effective_seed(a.common.seed));
  const AmbiguityFamily fam = trace_ambiguity_family(*first, *second, grid);
  json res = {{"grid", fam.grid}, {"samples", json::array()}, {"failures", json::array()}};
  for (const auto& s : fam.samples) {
    res["samples"].push_back({{"theta1", s.theta1},
                              {"body", body_to_json(s.body)},
                              {"camera1", pose_to_json(s.camera1)},
                              {"camera2", pose_to_json(s.camera2)},
                              {"vars", vars_json(s.vars)},
                              {"residual", s.residual}});
  }
  for (const auto& [i, c] : fam.failures) {
    res["failures"].push_back({{"index", i}, {"code", std::string(to_string(c))}});
  }
  res["break_index"] = fam.break_index ? json(*fam.break_index) : json(nullptr);
  res["max_pairwise_shape_distance"] = fam.max_pairwise_shape_distance();
  res["distinct_bodies"] = fam.demonstrates_distinct_bodies();
  res["status"] = fam.samples.empty() ? "error" : "ok";
  rep.finish(res, a.common, out);

  if (fam.break_index) err << fmt::format("FamilyBreak: continuation failed at grid index {}\n", *fam.break_index);
  if (!a.common.as_json) {
    out << fmt::format("{} of {} grid points solved; max pairwise shape distance {:.3e}\n", fam.samples.size(),
                       grid.size(), fam.max_pairwise_shape_distance());
    out << fmt::format("  {:>10} {:>10} {:>12}\n", "theta1", "residual", "vs first");
    for (const auto& s : fam.samples) {
      out << fmt::format("  {:>10.6f} {:>10.2e} {:>12.4e}\n", s.theta1, s.residual,
                         shape_distance(s.body, fam.samples.front().body));
    }
  }
  if (fam.samples.empty()) {
    err << "no grid point produced a body\n";
    return kExitSolver;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rigid structure and motion recovery from point correspondences", "rigid-recover"};
  app.set_version_flag("--version", RIGID_RECOVER_VERSION);
  app.require_subcommand(1);

  FeasArgs feas;
  auto* f = app.add_subcommand("feasibility", "degrees-of-freedom balance");
  f->add_option("--points", feas.points)->check(CLI::NonNegativeNumber);
  f->add_option("--lines", feas.lines)->check(CLI::NonNegativeNumber);
  f->add_option("--frames", feas.frames)->check(CLI::PositiveNumber);
  f->add_option("--projection", feas.projection)->check(CLI::IsMember({"orthogonal", "perspective"}));
  f->add_flag("--paper-table", feas.paper_table, "the seven reference configurations");
  add_common(f, feas.common, false);

  SynthArgs syn;
  auto* s = app.add_subcommand("synth", "generate a synthetic scene");
  s->add_option("--n-points", syn.spec.n_points)->check(CLI::Range(3, 26));
  s->add_option("--n-frames", syn.spec.n_frames)->check(CLI::Range(2, 1000));
  s->add_option("--projection", syn.projection)->check(CLI::IsMember({"orthogonal", "perspective"}));
  s->add_option("--body-scale", syn.spec.body_scale)->check(CLI::PositiveNumber);
  s->add_option("--max-rotation", syn.spec.motion.max_rotation)->check(CLI::NonNegativeNumber);
  s->add_option("--max-translation", syn.spec.motion.max_translation)->check(CLI::NonNegativeNumber);
  s->add_option("--noise-sigma", syn.spec.noise_sigma)->check(CLI::NonNegativeNumber);
  s->add_option("--min-volume", syn.spec.guard.min_volume)->check(CLI::NonNegativeNumber);
  s->add_option("--min-area", syn.spec.guard.min_area)->check(CLI::NonNegativeNumber);
  syn.common.seed = 0;
  add_common(s, syn.common, true);

  OrthoArgs ortho;
  auto* o = app.add_subcommand("recover-ortho", "orthogonal-projection recovery");
  o->add_option("--config", ortho.config)->required()->check(CLI::IsMember({"p3f3", "p4f2", "p3f4", "p4f3", "p5f2"}));
  o->add_option("--scene", ortho.scene)->required();
  add_common(o, ortho.common, true);

  PerspArgs persp;
  auto* p = app.add_subcommand("recover-persp", "two-frame five-point perspective recovery");
  p->add_option("--scene", persp.scene)->required();
  add_common(p, persp.common, true);

  AmbArgs amb;
  auto* a = app.add_subcommand("ambiguity", "trace a family of bodies fitting four points in two views");
  a->add_option("--scene", amb.scene)->required();
  a->add_option("--theta-center", amb.theta_center, "default: ground-truth theta1 from the scene");
  a->add_option("--theta-span", amb.theta_span);
  a->add_option("--grid-points", amb.grid_points);
  add_common(a, amb.common, true);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    if (rc == 0) return kExitOk;
    err << app.help();
    return kExitInput;
  }

  try {
    if (*f) return cmd_feasibility(feas, out);
    if (*s) return cmd_synth(syn, out);
    if (*o) return cmd_recover_ortho(ortho, out, err);
    if (*p) return cmd_recover_persp(persp, out, err);
    if (*a) return cmd_ambiguity(amb, out, err);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace rigid
