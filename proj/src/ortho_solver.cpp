#include "rigid_recover/ortho_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "rigid_recover/errors.hpp"
#include "rigid_recover/newton.hpp"

namespace rigid {

double triangle_quartic(const Triple& v) {
  return v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - 2.0 * (v[0] * v[1] + v[0] * v[2] + v[1] * v[2]);
}

namespace {

double clamped_radical(double true_sq, double proj_sq, double slack) {
  double r = true_sq - proj_sq;
  if (r < 0.0) {
    if (r < -slack) {
      throw Error(ErrorCode::NegativeRadicand, "true length shorter than its projection", std::nullopt, r);
    }
    r = 0.0;
  }
  return std::sqrt(r);
}

}  // namespace

double triangle_residual(const Triple& true_sq, const Triple& proj_sq, TriangleVariant variant, double slack) {
  Triple r{};
  for (int i = 0; i < 3; ++i) r[i] = clamped_radical(true_sq[i], proj_sq[i], slack);
  const int neg = static_cast<int>(variant);
  return r[0] + r[1] + r[2] - 2.0 * r[neg];
}

SquaredRow squared_triangle_row(const Triple& l) {
  SquaredRow row;
  row.coefficients = {2.0 * (l[0] - l[1] - l[2]), 2.0 * (-l[0] + l[1] - l[2]), 2.0 * (-l[0] - l[1] + l[2])};
  row.constant = triangle_quartic(l);
  return row;
}

double squared_triangle_gap(const Triple& true_sq, const Triple& proj_sq) {
  return triangle_quartic({true_sq[0] - proj_sq[0], true_sq[1] - proj_sq[1], true_sq[2] - proj_sq[2]});
}

std::array<SegmentKey, 3> TriangleRelation::sides() const {
  return {SegmentKey(labels[1], labels[2]), SegmentKey(labels[0], labels[2]), SegmentKey(labels[0], labels[1])};
}

Eigen::VectorXd SquaredSystem::residual(const Eigen::VectorXd& x) const {
  Eigen::VectorXd r = coefficients * x - rhs;
  if (kind == SystemKind::Quadratic) {
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const auto& t = row_triangles[static_cast<std::size_t>(i)];
      r(i) = triangle_quartic({x(t[0]), x(t[1]), x(t[2])}) + rhs(i) - coefficients.row(i).dot(x);
    }
  }
  return r;
}

Eigen::MatrixXd SquaredSystem::jacobian(const Eigen::VectorXd& x) const {
  if (kind == SystemKind::Linear) return coefficients;
  Eigen::MatrixXd j = -coefficients;
  for (Eigen::Index i = 0; i < j.rows(); ++i) {
    const auto& t = row_triangles[static_cast<std::size_t>(i)];
    const double a = x(t[0]), b = x(t[1]), c = x(t[2]);
    j(i, t[0]) += 2.0 * (a - b - c);
    j(i, t[1]) += 2.0 * (b - a - c);
    j(i, t[2]) += 2.0 * (c - a - b);
  }
  return j;
}

namespace {

int unknown_index(const std::vector<SegmentKey>& unknowns, const SegmentKey& key) {
  auto it = std::find(unknowns.begin(), unknowns.end(), key);
  if (it == unknowns.end()) throw Error(ErrorCode::InvalidArgument, "segment " + key.name() + " is not an unknown");
  return static_cast<int>(it - unknowns.begin());
}

double projected_sq(const FrameObservation& obs, const SegmentKey& key) {
  return (obs.image_point(key.first) - obs.image_point(key.second)).squaredNorm();
}

struct TriangleRows {
  std::array<int, 3> columns;
  std::vector<SquaredRow> per_frame;
};

std::vector<TriangleRows> triangle_rows(const std::vector<FrameObservation>& frames,
                                        const std::vector<std::array<Label, 3>>& triangles,
                                        const std::vector<SegmentKey>& unknowns) {
  std::vector<TriangleRows> out;
  for (const auto& labels : triangles) {
    const auto sides = TriangleRelation{labels}.sides();
    TriangleRows rows;
    for (int s = 0; s < 3; ++s) rows.columns[s] = unknown_index(unknowns, sides[s]);
    for (const auto& f : frames) {
      rows.per_frame.push_back(
          squared_triangle_row({projected_sq(f, sides[0]), projected_sq(f, sides[1]), projected_sq(f, sides[2])}));
    }
    out.push_back(std::move(rows));
  }
  return out;
}

}  // namespace

SquaredSystem build_quadratic_system(const std::vector<FrameObservation>& frames,
                                     const std::vector<std::array<Label, 3>>& triangles,
                                     const std::vector<SegmentKey>& unknowns) {
  const auto rows = triangle_rows(frames, triangles, unknowns);
  SquaredSystem sys;
  sys.kind = SystemKind::Quadratic;
  sys.unknowns = unknowns;
  const auto n_rows = static_cast<Eigen::Index>(frames.size() * triangles.size());
  sys.coefficients = Eigen::MatrixXd::Zero(n_rows, static_cast<Eigen::Index>(unknowns.size()));
  sys.rhs = Eigen::VectorXd::Zero(n_rows);
  Eigen::Index r = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (const auto& tri : rows) {
      for (int s = 0; s < 3; ++s) sys.coefficients(r, tri.columns[s]) = tri.per_frame[f].coefficients[s];
      sys.rhs(r) = tri.per_frame[f].constant;
      sys.row_triangles.push_back(tri.columns);
      ++r;
    }
  }
  return sys;
}

SquaredSystem build_linearized_system(const std::vector<FrameObservation>& frames,
                                      const std::vector<std::array<Label, 3>>& triangles,
                                      const std::vector<SegmentKey>& unknowns) {
  if (frames.size() < 2) throw Error(ErrorCode::InvalidArgument, "linearization needs at least two frames");
  const auto rows = triangle_rows(frames, triangles, unknowns);
  SquaredSystem sys;
  sys.kind = SystemKind::Linear;
  sys.unknowns = unknowns;
  const auto n_rows = static_cast<Eigen::Index>((frames.size() - 1) * triangles.size());
  sys.coefficients = Eigen::MatrixXd::Zero(n_rows, static_cast<Eigen::Index>(unknowns.size()));
  sys.rhs = Eigen::VectorXd::Zero(n_rows);
  Eigen::Index r = 0;
  for (std::size_t f = 1; f < frames.size(); ++f) {
    for (const auto& tri : rows) {
      for (int s = 0; s < 3; ++s) {
        sys.coefficients(r, tri.columns[s]) = tri.per_frame[f].coefficients[s] - tri.per_frame[0].coefficients[s];
      }
      sys.rhs(r) = tri.per_frame[f].constant - tri.per_frame[0].constant;
      sys.row_triangles.push_back(tri.columns);
      ++r;
    }
  }
  return sys;
}

const char* to_string(OrthoConfig config) {
  switch (config) {
    case OrthoConfig::P3F3: return "p3f3";
    case OrthoConfig::P4F2: return "p4f2";
    case OrthoConfig::P3F4: return "p3f4";
    case OrthoConfig::P4F3: return "p4f3";
    case OrthoConfig::P5F2: return "p5f2";
  }
  return "unknown";
}

OrthoConfig ortho_config_from_string(const std::string& name) {
  for (auto c : {OrthoConfig::P3F3, OrthoConfig::P4F2, OrthoConfig::P3F4, OrthoConfig::P4F3, OrthoConfig::P5F2}) {
    if (name == to_string(c)) return c;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown configuration '" + name + "'");
}

int config_points(OrthoConfig config) {
  switch (config) {
    case OrthoConfig::P3F3:
    case OrthoConfig::P3F4: return 3;
    case OrthoConfig::P4F2:
    case OrthoConfig::P4F3: return 4;
    case OrthoConfig::P5F2: return 5;
  }
  return 0;
}

int config_frames(OrthoConfig config) {
  switch (config) {
    case OrthoConfig::P4F2:
    case OrthoConfig::P5F2: return 2;
    case OrthoConfig::P3F3:
    case OrthoConfig::P4F3: return 3;
    case OrthoConfig::P3F4: return 4;
  }
  return 0;
}

double unsquared_residual(const std::vector<FrameObservation>& frames, const SegmentLengthSet& lengths) {
  double max_sq = 0.0;
  for (const auto& [key, v] : lengths.entries()) max_sq = std::max(max_sq, v);
  const double slack = kTolerances.radicand_slack * std::max(1.0, max_sq);
  double worst = 0.0;
  for (const auto& f : frames) {
    const auto& labels = f.labels;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (std::size_t j = i + 1; j < labels.size(); ++j) {
        for (std::size_t k = j + 1; k < labels.size(); ++k) {
          const auto sides = TriangleRelation{{labels[i], labels[j], labels[k]}}.sides();
          Triple true_sq{}, proj_sq{};
          for (int s = 0; s < 3; ++s) {
            true_sq[s] = lengths.at(sides[s].first, sides[s].second);
            proj_sq[s] = projected_sq(f, sides[s]);
          }
          double best = INFINITY;
          for (auto v : kTriangleVariants) best = std::min(best, std::abs(triangle_residual(true_sq, proj_sq, v, slack)));
          worst = std::max(worst, best);
        }
      }
    }
  }
  return worst;
}

namespace {

struct Prepared {
  std::vector<FrameObservation> frames;  // labels sorted, same order in every frame
  std::vector<Label> labels;
  std::vector<SegmentKey> unknowns;
  double scale_sq = 1.0;  // largest projected squared length
};

Prepared prepare(const std::vector<FrameObservation>& input, int n_points, int n_frames) {
  if (static_cast<int>(input.size()) != n_frames) {
    throw Error(ErrorCode::InvalidArgument,
                "expected " + std::to_string(n_frames) + " frames, got " + std::to_string(input.size()));
  }
  Prepared p;
  p.labels = input.front().labels;
  std::sort(p.labels.begin(), p.labels.end());
  if (static_cast<int>(p.labels.size()) != n_points) {
    throw Error(ErrorCode::InvalidArgument,
                "expected " + std::to_string(n_points) + " points, got " + std::to_string(p.labels.size()));
  }
  for (const auto& f : input) {
    if (f.kind != ProjectionKind::Orthogonal) throw Error(ErrorCode::WrongKind, "orthogonal frames required");
    auto sorted = f.labels;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != p.labels) throw Error(ErrorCode::LabelMismatch, "frames observe different label sets");
    FrameObservation c;
    c.kind = f.kind;
    c.frame = f.frame;
    for (const auto& l : p.labels) {
      c.labels.push_back(l);
      c.image.push_back(f.image_point(l));
    }
    p.frames.push_back(std::move(c));
  }

  for (std::size_t fi = 0; fi < p.frames.size(); ++fi) {
    const auto& f = p.frames[fi];
    for (std::size_t i = 0; i < f.size(); ++i) {
      for (std::size_t j = i + 1; j < f.size(); ++j) {
        for (std::size_t k = j + 1; k < f.size(); ++k) {
          const Eigen::Vector2d u = f.image[j] - f.image[i];
          const Eigen::Vector2d v = f.image[k] - f.image[i];
          const double area = 0.5 * std::abs(u.x() * v.y() - u.y() * v.x());
          if (area < kTolerances.min_image_area) {
            throw Error(ErrorCode::DegenerateImages,
                        "image triangle " + f.labels[i] + f.labels[j] + f.labels[k] + " in frame " +
                            std::to_string(f.frame) + " is degenerate",
                        fi, area);
          }
        }
      }
    }
  }

  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    for (std::size_t j = i + 1; j < p.labels.size(); ++j) p.unknowns.emplace_back(p.labels[i], p.labels[j]);
  }
  double m = 0.0;
  for (const auto& f : p.frames) {
    for (const auto& key : p.unknowns) m = std::max(m, projected_sq(f, key));
  }
  p.scale_sq = m;
  return p;
}

// Same frames with image coordinates divided by sqrt(scale_sq).
std::vector<FrameObservation> normalized_frames(const Prepared& p) {
  const double s = 1.0 / std::sqrt(p.scale_sq);
  auto out = p.frames;
  for (auto& f : out) {
    for (auto& pt : f.image) pt *= s;
  }
  return out;
}

std::vector<std::array<Label, 3>> solving_triangles(const std::vector<Label>& l) {
  if (l.size() == 3) return {{l[0], l[1], l[2]}};
  if (l.size() == 4) {
    // BCD, ACD, ABD; ABC is implied and only checked.
    return {{l[1], l[2], l[3]}, {l[0], l[2], l[3]}, {l[0], l[1], l[3]}};
  }
  std::vector<std::array<Label, 3>> all;
  for (std::size_t i = 0; i < l.size(); ++i)
    for (std::size_t j = i + 1; j < l.size(); ++j)
      for (std::size_t k = j + 1; k < l.size(); ++k) all.push_back({l[i], l[j], l[k]});
  return all;
}

RecoveryResult finalize(const Prepared& p, const Eigen::VectorXd& x_normalized) {
  RecoveryResult out;
  for (std::size_t j = 0; j < p.unknowns.size(); ++j) {
    const double v = x_normalized(static_cast<Eigen::Index>(j)) * p.scale_sq;
    if (!(v > 0.0)) throw Error(ErrorCode::NonPositiveLengths, "squared length of " + p.unknowns[j].name() + " <= 0");
    out.lengths.set(p.unknowns[j].first, p.unknowns[j].second, v);
  }
  double max_sq = 0.0;
  for (const auto& [k, v] : out.lengths.entries()) max_sq = std::max(max_sq, v);
  const double scale = std::sqrt(max_sq);

  out.residual = unsquared_residual(p.frames, out.lengths);
  if (out.residual > kTolerances.variant_filter * scale) {
    throw Error(ErrorCode::NoSolution, "no sign variant satisfies every triangle", std::nullopt, out.residual);
  }

  std::vector<std::vector<RigidBodyModel>> twins;
  for (const auto& f : p.frames) twins.push_back(lengths_to_structure(f, out.lengths));

  out.structures.push_back(twins[0][0]);
  const Eigen::Matrix3Xd first = twins[0][0].matrix();
  for (std::size_t i = 1; i < twins.size(); ++i) {
    std::size_t best = 0;
    double best_rms = INFINITY;
    for (std::size_t t = 0; t < twins[i].size(); ++t) {
      const double rms = procrustes_align(first, twins[i][t].matrix()).rms;
      if (rms < best_rms) {
        best_rms = rms;
        best = t;
      }
    }
    out.structures.push_back(twins[i][best]);
  }
  out.motions = extract_motion(out.structures);

  const double depth_tol = kTolerances.depth_closure * scale;
  const Eigen::Matrix3Xd s0 = out.structures[0].matrix();
  out.mirror_flag = s0.row(2).cwiseAbs().maxCoeff() > depth_tol;
  if (out.mirror_flag) {
    for (const auto& s : out.structures) out.mirror_structures.push_back(reflect_depth(s));
    out.mirror_motions = extract_motion(out.mirror_structures);
  }
  return out;
}

bool lex_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) != b(i)) return a(i) < b(i);
  }
  return false;
}

bool same_root(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double rel) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double s = std::max({std::abs(a(i)), std::abs(b(i)), 1e-300});
    if (std::abs(a(i) - b(i)) > rel * s) return false;
  }
  return true;
}

// Squaring amplifies error near small depth offsets: a root good to 1e-12 in
// the squared system can be off by 1e-8 in the unsquared one. A few Newton
// steps on the unsquared relations, with the variant each row currently
// favours, bring it back to rounding level. Returns x unchanged if that fails.
Eigen::VectorXd polish_unsquared(const std::vector<FrameObservation>& frames,
                                 const std::vector<std::array<Label, 3>>& triangles,
                                 const std::vector<SegmentKey>& unknowns, const Eigen::VectorXd& x) {
  struct Row {
    std::array<Eigen::Index, 3> cols;
    Triple proj;
    int neg;
  };
  std::vector<Row> rows;
  for (const auto& f : frames) {
    for (const auto& tri : triangles) {
      Row row{};
      const auto sides = TriangleRelation{tri}.sides();
      Triple t{};
      for (int i = 0; i < 3; ++i) {
        row.cols[i] = std::find(unknowns.begin(), unknowns.end(), sides[i]) - unknowns.begin();
        row.proj[i] = projected_sq(f, sides[i]);
        t[i] = x(row.cols[i]);
        if (!(t[i] - row.proj[i] > 1e-10)) return x;  // radical too flat to linearise
      }
      double best = INFINITY;
      for (auto v : kTriangleVariants) {
        const double r = std::abs(triangle_residual(t, row.proj, v));
        if (r < best) {
          best = r;
          row.neg = static_cast<int>(v);
        }
      }
      rows.push_back(row);
    }
  }
  const ResidualFn f = [&rows, n = x.size()](const Eigen::VectorXd& y, Eigen::MatrixXd* jac) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows.size()));
    if (jac) *jac = Eigen::MatrixXd::Zero(r.size(), n);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto& row = rows[k];
      for (int i = 0; i < 3; ++i) {
        const double rad = y(row.cols[i]) - row.proj[i];
        if (!(rad > 0.0)) return Eigen::VectorXd::Constant(r.size(), NAN).eval();
        const double sgn = i == row.neg ? -1.0 : 1.0;
        r(static_cast<Eigen::Index>(k)) += sgn * std::sqrt(rad);
        if (jac) (*jac)(static_cast<Eigen::Index>(k), row.cols[i]) += sgn * 0.5 / std::sqrt(rad);
      }
    }
    return r;
  };
  NewtonOptions opts;
  opts.max_iterations = 8;
  opts.tolerance = 1e-15;
  const NewtonResult before = damped_newton(f, x, {.max_iterations = 0});
  const NewtonResult after = damped_newton(f, x, opts);
  if (after.residual < before.residual && (after.x - x).norm() < 1e-6 * x.norm()) return after.x;
  return x;
}

std::vector<RecoveryResult> solve_quadratic(const std::vector<FrameObservation>& frames, int n_points, int n_frames,
                                            const QuadraticSolveOptions& options) {
  const Prepared p = prepare(frames, n_points, n_frames);
  const auto norm_frames = normalized_frames(p);
  const auto triangles = solving_triangles(p.labels);
  const SquaredSystem sys = build_quadratic_system(norm_frames, triangles, p.unknowns);

  const auto m = static_cast<Eigen::Index>(p.unknowns.size());
  Eigen::VectorXd base(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    double mx = 0.0;
    for (const auto& f : norm_frames) mx = std::max(mx, projected_sq(f, p.unknowns[static_cast<std::size_t>(j)]));
    base(j) = mx;
  }

  std::vector<Eigen::VectorXd> starts;
  for (double k : options.start_scales) starts.push_back(k * base);
  std::mt19937_64 rng(options.seed);
  // Log-uniform factors in [1, 20]: true squares can far exceed every projection.
  std::uniform_real_distribution<double> log_factor(0.0, std::log(20.0));
  for (int s = 0; s < options.random_starts; ++s) {
    Eigen::VectorXd x(m);
    for (Eigen::Index j = 0; j < m; ++j) x(j) = base(j) * std::exp(log_factor(rng));
    starts.push_back(std::move(x));
  }

  const ResidualFn f = [&sys](const Eigen::VectorXd& x, Eigen::MatrixXd* jac) {
    if (jac) *jac = sys.jacobian(x);
    return sys.residual(x);
  };
  NewtonOptions newton;
  newton.max_iterations = 60;

  std::vector<Eigen::VectorXd> roots;
  for (const auto& s : starts) {
    const NewtonResult r = damped_newton(f, s, newton);
    if (r.converged && (r.x.array() > 0.0).all()) roots.push_back(polish_unsquared(norm_frames, triangles, p.unknowns, r.x));
  }
  std::sort(roots.begin(), roots.end(), lex_less);
  std::vector<Eigen::VectorXd> unique;
  for (const auto& r : roots) {
    bool dup = false;
    for (const auto& u : unique) dup = dup || same_root(r, u, kTolerances.root_dedup);
    if (!dup) unique.push_back(r);
  }

  std::vector<RecoveryResult> results;
  for (const auto& r : unique) {
    try {
      RecoveryResult res = finalize(p, r);
      res.isolated = inverse_condition(sys.jacobian(r)) >= kTolerances.isolation_limit;
      results.push_back(std::move(res));
    } catch (const Error&) {
      // Spurious root of the squared system.
    }
  }
  if (results.empty()) {
    throw Error(ErrorCode::NoSolution, "no root of the squared system satisfies the unsquared relations");
  }
  return results;
}

std::vector<RecoveryResult> solve_linear(const std::vector<FrameObservation>& frames, int n_points, int n_frames) {
  const Prepared p = prepare(frames, n_points, n_frames);
  const SquaredSystem sys = build_linearized_system(normalized_frames(p), solving_triangles(p.labels), p.unknowns);
  const double inv_cond = inverse_condition(sys.coefficients);
  if (inv_cond * kTolerances.condition_limit < 1.0) {
    throw Error(ErrorCode::IllConditioned, "linearized system is singular or nearly so (special motion?)",
                std::nullopt, inv_cond == 0.0 ? INFINITY : 1.0 / inv_cond);
  }
  const Eigen::VectorXd x = sys.coefficients.fullPivLu().solve(sys.rhs);
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (!(x(j) > 0.0)) {
      throw Error(ErrorCode::NonPositiveLengths,
                  "solved square of " + p.unknowns[static_cast<std::size_t>(j)].name() + " is not positive",
                  std::nullopt, x(j) * p.scale_sq);
    }
  }
  try {
    return {finalize(p, x)};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NoSolution) throw;
    throw Error(ErrorCode::NoSolution, std::string("linear solution rejected: ") + e.what());
  }
}

}  // namespace

std::vector<RecoveryResult> solve_p3f3(const std::vector<FrameObservation>& frames,
                                       const QuadraticSolveOptions& options) {
  return solve_quadratic(frames, 3, 3, options);
}

std::vector<RecoveryResult> solve_p4f2(const std::vector<FrameObservation>& frames,
                                       const QuadraticSolveOptions& options) {
  return solve_quadratic(frames, 4, 2, options);
}

std::vector<RecoveryResult> solve_p3f4_linear(const std::vector<FrameObservation>& frames) {
  return solve_linear(frames, 3, 4);
}

std::vector<RecoveryResult> solve_p4f3_linear(const std::vector<FrameObservation>& frames) {
  return solve_linear(frames, 4, 3);
}

std::vector<RecoveryResult> solve_p5f2_linear(const std::vector<FrameObservation>& frames) {
  return solve_linear(frames, 5, 2);
}

std::vector<RecoveryResult> recover_orthogonal(OrthoConfig config, const std::vector<FrameObservation>& frames) {
  switch (config) {
    case OrthoConfig::P3F3: return solve_p3f3(frames);
    case OrthoConfig::P4F2: return solve_p4f2(frames);
    case OrthoConfig::P3F4: return solve_p3f4_linear(frames);
    case OrthoConfig::P4F3: return solve_p4f3_linear(frames);
    case OrthoConfig::P5F2: return solve_p5f2_linear(frames);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown configuration");
}

}  // namespace rigid
