#include "rigid_recover/persp_solver.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unsupported/Eigen/AutoDiff>

#include "rigid_recover/newton.hpp"
#include "rigid_recover/tolerances.hpp"

namespace rigid {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

using AD = Eigen::AutoDiffScalar<Eigen::VectorXd>;
template <typename T>
using Vec3 = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Mat3 = Eigen::Matrix<T, 3, 3>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
Vec3<T> unit(const Vec3<T>& v) {
  using std::sqrt;
  return v / sqrt(v.squaredNorm());
}

// Apex of triangle A B f with |AB| = 1, angle theta at B and angle
// `subtended` at f, on the y > 0 side of the x axis.
template <typename T>
Vec3<T> arc_point(const T& theta, double subtended) {
  using std::cos;
  using std::sin;
  const T rho = sin(theta + subtended) / std::sin(subtended);
  Vec3<T> p;
  p << T(1.0) - rho * cos(theta), rho * sin(theta), T(0.0);
  return p;
}

template <typename T>
Vec3<T> surface_point(const T& theta, const T& phi, double subtended) {
  using std::cos;
  using std::sin;
  const Vec3<T> p = arc_point<T>(theta, subtended);
  Vec3<T> q;
  q << p(0), p(1) * cos(phi), p(1) * sin(phi);
  return q;
}

// World basis at the focal point: directions to A and B orthonormalized.
template <typename T>
Mat3<T> world_basis(const Vec3<T>& focal, double sign) {
  const Vec3<T> da = unit<T>(Vec3<T>(-focal));
  Vec3<T> to_b = -focal;
  to_b(0) += T(1.0);
  const Vec3<T> db = unit<T>(to_b);
  const Vec3<T> w2 = unit<T>(Vec3<T>(db - da.dot(db) * da));
  const Vec3<T> w3 = da.cross(w2) * T(sign);
  Mat3<T> w;
  w.col(0) = da;
  w.col(1) = w2;
  w.col(2) = w3;
  return w;
}

// Transpose of the camera-side basis built from the rays to A and B.
Eigen::Matrix3d camera_basis_transpose(const Eigen::Vector3d& ray_a, const Eigen::Vector3d& ray_b) {
  const Eigen::Vector3d e1 = ray_a.normalized();
  const Eigen::Vector3d e2 = (ray_b - e1.dot(ray_b) * e1).normalized();
  Eigen::Matrix3d e;
  e.col(0) = e1;
  e.col(1) = e2;
  e.col(2) = e1.cross(e2);
  return e.transpose();
}

double handed_sign(Handedness h) { return h == Handedness::Proper ? 1.0 : -1.0; }

struct MeetData {
  double alpha = 0.0;  // observed angle A f1 B
  double beta = 0.0;   // observed angle A f2 B
  Eigen::Matrix3d basis1_t;
  Eigen::Matrix3d basis2_t;
  double sign1 = 1.0;
  double sign2 = 1.0;
  std::vector<Eigen::Vector3d> rays1;
  std::vector<Eigen::Vector3d> rays2;
  MeetLabels labels;
  HandednessPair handedness;
};

MeetData make_data(const FrameObservation& first, const FrameObservation& second, const MeetLabels& labels,
                   HandednessPair h) {
  if (first.kind != ProjectionKind::Perspective || second.kind != ProjectionKind::Perspective) {
    throw Error(ErrorCode::WrongKind, "perspective observations required");
  }
  MeetData d;
  d.labels = labels;
  d.handedness = h;
  d.alpha = view_angle(first, labels.a, labels.b);
  d.beta = view_angle(second, labels.a, labels.b);
  if (d.alpha <= 0.0 || d.alpha >= kPi || d.beta <= 0.0 || d.beta >= kPi) {
    throw Error(ErrorCode::DegenerateConfiguration, "rays to the anchor points are parallel");
  }
  d.basis1_t = camera_basis_transpose(first.ray(labels.a), first.ray(labels.b));
  d.basis2_t = camera_basis_transpose(second.ray(labels.a), second.ray(labels.b));
  d.sign1 = handed_sign(h.first);
  d.sign2 = handed_sign(h.second);
  for (const auto& l : labels.constrained) {
    d.rays1.push_back(first.ray(l));
    d.rays2.push_back(second.ray(l));
  }
  return d;
}

// Full variable vector x = [theta1, theta2, phi2, t'..., t''...].
template <typename T>
VecX<T> meet_kernel(const VecX<T>& x, const MeetData& d) {
  using std::cos;
  using std::sin;
  const auto m = static_cast<Eigen::Index>(d.rays1.size());
  const Vec3<T> f1 = arc_point<T>(x(0), d.alpha);
  const Vec3<T> f2 = surface_point<T>(x(1), x(2), d.beta);
  const Mat3<T> r1 = world_basis<T>(f1, d.sign1) * d.basis1_t.cast<T>();
  const Mat3<T> r2 = world_basis<T>(f2, d.sign2) * d.basis2_t.cast<T>();
  VecX<T> out(3 * m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Vec3<T> v1 = r1 * d.rays1[static_cast<std::size_t>(j)].cast<T>();
    const Vec3<T> v2 = r2 * d.rays2[static_cast<std::size_t>(j)].cast<T>();
    out.template segment<3>(3 * j) = f1 + x(3 + j) * v1 - f2 - x(3 + m + j) * v2;
  }
  return out;
}

Eigen::VectorXd eval_residual(const Eigen::VectorXd& x, const MeetData& d, Eigen::MatrixXd* jac) {
  if (!jac) return meet_kernel<double>(x, d);
  const auto n = x.size();
  VecX<AD> xa(n);
  for (Eigen::Index i = 0; i < n; ++i) xa(i) = AD(x(i), n, i);
  const VecX<AD> r = meet_kernel<AD>(xa, d);
  Eigen::VectorXd value(r.size());
  jac->resize(r.size(), n);
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    value(i) = r(i).value();
    if (r(i).derivatives().size() == n) {
      jac->row(i) = r(i).derivatives().transpose();
    } else {
      jac->row(i).setZero();
    }
  }
  return value;
}

double wrap_angle(double phi) {
  double w = std::fmod(phi, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  return w;
}

bool on_arc(double theta, double subtended) { return theta > 0.0 && theta + subtended < kPi; }

NewtonOptions meet_newton_options() {
  NewtonOptions o;
  o.max_iterations = 40;
  o.backtrack_factor = 0.5;
  o.tolerance = kTolerances.meet_converge;
  return o;
}

// Newton over the full vector, or with theta1 frozen at x0(0).
NewtonResult run_newton(const MeetData& d, const Eigen::VectorXd& x0, bool freeze_theta1) {
  if (!freeze_theta1) {
    const ResidualFn f = [&d](const Eigen::VectorXd& x, Eigen::MatrixXd* jac) { return eval_residual(x, d, jac); };
    return damped_newton(f, x0, meet_newton_options());
  }
  const double theta1 = x0(0);
  const auto n = x0.size();
  const ResidualFn f = [&d, theta1, n](const Eigen::VectorXd& y, Eigen::MatrixXd* jac) {
    Eigen::VectorXd x(n);
    x(0) = theta1;
    x.tail(n - 1) = y;
    if (!jac) return eval_residual(x, d, nullptr);
    Eigen::MatrixXd full;
    Eigen::VectorXd r = eval_residual(x, d, &full);
    *jac = full.rightCols(n - 1);
    return r;
  };
  NewtonResult r = damped_newton(f, x0.tail(n - 1), meet_newton_options());
  Eigen::VectorXd x(n);
  x(0) = theta1;
  x.tail(n - 1) = r.x;
  r.x = x;
  return r;
}

// Builds the solution for an accepted root; nullopt when a filter rejects it.
std::optional<PerspectiveSolution> accept_root(const MeetData& d, const Eigen::VectorXd& x, bool freeze_theta1) {
  if (!x.allFinite()) return std::nullopt;
  Eigen::MatrixXd jac;
  const Eigen::VectorXd r = eval_residual(x, d, &jac);
  const double res = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  if (!(res < kTolerances.meet_accept)) return std::nullopt;
  if (!on_arc(x(0), d.alpha) || !on_arc(x(1), d.beta)) return std::nullopt;
  if ((x.tail(x.size() - 3).array() <= 0.0).any()) return std::nullopt;
  const Eigen::MatrixXd system_jac = freeze_theta1 ? Eigen::MatrixXd(jac.rightCols(jac.cols() - 1)) : jac;
  if (inverse_condition(system_jac) < kTolerances.isolation_limit) return std::nullopt;

  const bool both_reflected = d.handedness.first == Handedness::Reflected && d.handedness.second == Handedness::Reflected;
  if (d.handedness.first != d.handedness.second) return std::nullopt;  // one mirrored camera

  const auto m = static_cast<Eigen::Index>(d.rays1.size());
  const Eigen::Vector3d f1 = arc_point<double>(x(0), d.alpha);
  const Eigen::Vector3d f2 = surface_point<double>(x(1), x(2), d.beta);
  const Eigen::Matrix3d r1 = world_basis<double>(f1, d.sign1) * d.basis1_t;
  const Eigen::Matrix3d r2 = world_basis<double>(f2, d.sign2) * d.basis2_t;

  std::vector<BodyPoint> pts{{d.labels.a, Eigen::Vector3d::Zero()}, {d.labels.b, Eigen::Vector3d::UnitX()}};
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Vector3d p1 = f1 + x(3 + j) * (r1 * d.rays1[static_cast<std::size_t>(j)]);
    const Eigen::Vector3d p2 = f2 + x(3 + m + j) * (r2 * d.rays2[static_cast<std::size_t>(j)]);
    pts.push_back({d.labels.constrained[static_cast<std::size_t>(j)], 0.5 * (p1 + p2)});
  }

  PerspectiveSolution sol;
  sol.handedness = d.handedness;
  sol.residual = res;
  Eigen::VectorXd xs = x;
  if (both_reflected) {
    // The mirror image through z = 0 of a doubly reflected root is a proper one.
    const Eigen::Matrix3d mirror = Eigen::Vector3d(1.0, 1.0, -1.0).asDiagonal();
    for (auto& p : pts) p.position = mirror * p.position;
    sol.camera1 = {mirror * r1, mirror * f1};
    sol.camera2 = {mirror * r2, mirror * f2};
    xs(2) = -xs(2);
  } else {
    sol.camera1 = {r1, f1};
    sol.camera2 = {r2, f2};
  }
  xs(2) = wrap_angle(xs(2));
  sol.vars = MeetVariables::unflatten(xs);
  sol.body = RigidBodyModel(std::move(pts));
  sol.relative.rotation = sol.camera1.rotation.transpose() * sol.camera2.rotation;
  sol.relative.translation = sol.camera1.rotation.transpose() * (sol.camera2.translation - sol.camera1.translation);
  return sol;
}

struct Start {
  double score;
  Eigen::VectorXd x;
};

// Ray parameters by closest approach of each ray pair for fixed poses, and a
// score: summed squared miss distance, with a penalty for points behind a camera.
Start closest_approach_start(const MeetData& d, double theta1, double theta2, double phi2) {
  const auto m = static_cast<Eigen::Index>(d.rays1.size());
  const Eigen::Vector3d f1 = arc_point<double>(theta1, d.alpha);
  const Eigen::Vector3d f2 = surface_point<double>(theta2, phi2, d.beta);
  const Eigen::Matrix3d r1 = world_basis<double>(f1, d.sign1) * d.basis1_t;
  const Eigen::Matrix3d r2 = world_basis<double>(f2, d.sign2) * d.basis2_t;
  const Eigen::Vector3d w = f2 - f1;
  Start s{0.0, Eigen::VectorXd(3 + 2 * m)};
  s.x(0) = theta1;
  s.x(1) = theta2;
  s.x(2) = phi2;
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Vector3d v1 = r1 * d.rays1[static_cast<std::size_t>(j)];
    const Eigen::Vector3d v2 = r2 * d.rays2[static_cast<std::size_t>(j)];
    const double c = v1.dot(v2);
    const double det = 1.0 - c * c;
    double a = w.norm(), b = w.norm();
    if (det > 1e-12) {
      a = (v1.dot(w) - c * v2.dot(w)) / det;
      b = (c * v1.dot(w) - v2.dot(w)) / det;
    }
    const Eigen::Vector3d miss = f1 + a * v1 - f2 - b * v2;
    s.score += miss.squaredNorm();
    if (a <= 0.0 || b <= 0.0) s.score += 100.0;
    s.x(3 + j) = std::max(a, 1e-3);
    s.x(3 + m + j) = std::max(b, 1e-3);
  }
  return s;
}

std::vector<Start> best_starts(std::vector<Start> all, int keep) {
  std::sort(all.begin(), all.end(), [](const Start& p, const Start& q) { return p.score < q.score; });
  if (static_cast<int>(all.size()) > keep) all.resize(static_cast<std::size_t>(keep));
  return all;
}

bool lex_less_vars(const PerspectiveSolution& p, const PerspectiveSolution& q) {
  const Eigen::VectorXd a = p.vars.flatten();
  const Eigen::VectorXd b = q.vars.flatten();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) != b(i)) return a(i) < b(i);
  }
  return false;
}

std::vector<PerspectiveSolution> dedup_by_shape(std::vector<PerspectiveSolution> sols) {
  std::sort(sols.begin(), sols.end(), lex_less_vars);
  std::vector<PerspectiveSolution> out;
  for (auto& s : sols) {
    bool dup = false;
    for (const auto& u : out) dup = dup || shape_distance(s.body, u.body) < kTolerances.shape_dedup;
    if (!dup) out.push_back(std::move(s));
  }
  return out;
}

void check_rays(const FrameObservation& obs) {
  const auto n = static_cast<Eigen::Index>(obs.rays.size());
  Eigen::Matrix3Xd m(3, n);
  for (Eigen::Index i = 0; i < n; ++i) m.col(i) = obs.rays[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (angle_between(m.col(i), m.col(j)) < kTolerances.geometric_equality) {
        throw Error(ErrorCode::DegenerateConfiguration,
                    "rays of " + obs.labels[static_cast<std::size_t>(i)] + " and " +
                        obs.labels[static_cast<std::size_t>(j)] + " coincide in frame " + std::to_string(obs.frame));
      }
    }
  }
  if (n >= 3) {
    Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(m);
    const auto& s = svd.singularValues();
    if (s(2) < kTolerances.geometric_equality * s(0)) {
      throw Error(ErrorCode::DegenerateConfiguration,
                  "all rays of frame " + std::to_string(obs.frame) + " lie in one plane");
    }
  }
}

void check_pair(const FrameObservation& first, const FrameObservation& second, std::size_t n_points) {
  if (first.kind != ProjectionKind::Perspective || second.kind != ProjectionKind::Perspective) {
    throw Error(ErrorCode::WrongKind, "perspective observations required");
  }
  if (first.size() != n_points || second.size() != n_points) {
    throw Error(ErrorCode::InvalidArgument, "expected " + std::to_string(n_points) + " labeled points per frame");
  }
  auto a = first.labels, b = second.labels;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a != b) throw Error(ErrorCode::LabelMismatch, "frames observe different label sets");
  for (const auto& r : first.rays) {
    if (std::abs(r.norm() - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "rays must be unit vectors");
  }
  for (const auto& r : second.rays) {
    if (std::abs(r.norm() - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "rays must be unit vectors");
  }
}

double arc_sample(int i, int n, double subtended) {
  return (kPi - subtended) * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
}

}  // namespace

Eigen::VectorXd MeetVariables::flatten() const {
  const auto m = static_cast<Eigen::Index>(lines.first.size());
  Eigen::VectorXd x(3 + 2 * m);
  x(0) = pose.theta1;
  x(1) = pose.theta2;
  x(2) = pose.phi2;
  for (Eigen::Index j = 0; j < m; ++j) {
    x(3 + j) = lines.first[static_cast<std::size_t>(j)];
    x(3 + m + j) = lines.second[static_cast<std::size_t>(j)];
  }
  return x;
}

MeetVariables MeetVariables::unflatten(const Eigen::VectorXd& x) {
  if (x.size() < 3 || (x.size() - 3) % 2 != 0) {
    throw Error(ErrorCode::InvalidArgument, "variable vector has the wrong length");
  }
  MeetVariables v;
  v.pose = {x(0), x(1), x(2)};
  const auto m = (x.size() - 3) / 2;
  for (Eigen::Index j = 0; j < m; ++j) {
    v.lines.first.push_back(x(3 + j));
    v.lines.second.push_back(x(3 + m + j));
  }
  return v;
}

MeetLabels default_meet_labels(const FrameObservation& obs) {
  auto labels = obs.labels;
  std::sort(labels.begin(), labels.end());
  if (labels.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two labeled points");
  MeetLabels out{labels[0], labels[1], {}};
  out.constrained.assign(labels.begin() + 2, labels.end());
  return out;
}

Eigen::Vector3d place_f1(double theta1, double observed_angle) {
  if (!(observed_angle > 0.0 && observed_angle < kPi)) {
    throw Error(ErrorCode::OutOfArc, "observed angle must lie in (0, pi)", std::nullopt, observed_angle);
  }
  if (!on_arc(theta1, observed_angle)) {
    throw Error(ErrorCode::OutOfArc, "theta outside the inscribed-angle arc", std::nullopt, theta1);
  }
  return arc_point<double>(theta1, observed_angle);
}

Eigen::Vector3d place_f2(double theta2, double phi2, double observed_angle) {
  place_f1(theta2, observed_angle);
  return surface_point<double>(theta2, phi2, observed_angle);
}

Eigen::Matrix3d camera_orientation(const Eigen::Vector3d& focal, const Eigen::Vector3d& ray_a,
                                   const Eigen::Vector3d& ray_b, Handedness handedness) {
  const Eigen::Vector3d to_a = -focal;
  const Eigen::Vector3d to_b = Eigen::Vector3d::UnitX() - focal;
  const double world = angle_between(to_a, to_b);
  const double camera = angle_between(ray_a, ray_b);
  if (std::abs(world - camera) > kTolerances.geometric_equality) {
    throw Error(ErrorCode::AngleMismatch, "camera rays and world directions subtend different angles",
                std::nullopt, camera - world);
  }
  return world_basis<double>(focal, handed_sign(handedness)) * camera_basis_transpose(ray_a, ray_b);
}

Eigen::VectorXd meet_residual(const MeetVariables& vars, const FrameObservation& first,
                              const FrameObservation& second, const MeetLabels& labels, HandednessPair handedness) {
  const MeetData d = make_data(first, second, labels, handedness);
  if (vars.lines.first.size() != labels.constrained.size() || vars.lines.second.size() != labels.constrained.size()) {
    throw Error(ErrorCode::InvalidArgument, "one ray parameter per constrained label and frame required");
  }
  place_f1(vars.pose.theta1, d.alpha);
  place_f2(vars.pose.theta2, vars.pose.phi2, d.beta);
  return eval_residual(vars.flatten(), d, nullptr);
}

Eigen::MatrixXd meet_jacobian(const MeetVariables& vars, const FrameObservation& first,
                              const FrameObservation& second, const MeetLabels& labels, HandednessPair handedness) {
  const MeetData d = make_data(first, second, labels, handedness);
  Eigen::MatrixXd jac;
  eval_residual(vars.flatten(), d, &jac);
  return jac;
}

std::vector<PerspectiveSolution> solve_five_point_two_frame(const FrameObservation& first,
                                                            const FrameObservation& second,
                                                            const FivePointOptions& options) {
  check_pair(first, second, 5);
  check_rays(first);
  check_rays(second);
  const MeetLabels labels = default_meet_labels(first);

  std::vector<PerspectiveSolution> found;
  double best = INFINITY;
  for (auto h1 : {Handedness::Proper, Handedness::Reflected}) {
    for (auto h2 : {Handedness::Proper, Handedness::Reflected}) {
      const MeetData d = make_data(first, second, labels, {h1, h2});
      std::vector<Start> grid;
      for (int i = 0; i < options.theta_samples; ++i) {
        for (int j = 0; j < options.theta_samples; ++j) {
          for (int k = 0; k < options.phi_samples; ++k) {
            grid.push_back(closest_approach_start(d, arc_sample(i, options.theta_samples, d.alpha),
                                                  arc_sample(j, options.theta_samples, d.beta),
                                                  kTwoPi * k / options.phi_samples));
          }
        }
      }
      for (const auto& s : best_starts(std::move(grid), options.newton_starts)) {
        const NewtonResult r = run_newton(d, s.x, false);
        best = std::min(best, r.residual);
        if (auto sol = accept_root(d, r.x, false)) found.push_back(std::move(*sol));
      }
    }
  }
  auto out = dedup_by_shape(std::move(found));
  if (out.empty()) {
    throw Error(ErrorCode::NoConvergence, "no start converged to an admissible root", std::nullopt, best);
  }
  return out;
}

PerspectiveSolution refine_two_frame(const FrameObservation& first, const FrameObservation& second,
                                     const MeetVariables& start, HandednessPair handedness) {
  const MeetLabels labels = default_meet_labels(first);
  const MeetData d = make_data(first, second, labels, handedness);
  if (start.lines.first.size() != labels.constrained.size()) {
    throw Error(ErrorCode::InvalidArgument, "start has the wrong number of ray parameters");
  }
  const NewtonResult r = run_newton(d, start.flatten(), false);
  auto sol = accept_root(d, r.x, false);
  if (!sol) throw Error(ErrorCode::NoConvergence, "refinement did not reach an admissible root", std::nullopt, r.residual);
  return *sol;
}

std::vector<PerspectiveSolution> solve_at_theta1(const FrameObservation& first, const FrameObservation& second,
                                                 double theta1, const FamilyOptions& options) {
  check_pair(first, second, 4);
  const MeetLabels labels = default_meet_labels(first);
  const MeetData d = make_data(first, second, labels, {});
  place_f1(theta1, d.alpha);

  std::vector<Start> grid;
  for (int j = 0; j < options.theta_samples; ++j) {
    for (int k = 0; k < options.phi_samples; ++k) {
      grid.push_back(closest_approach_start(d, theta1, arc_sample(j, options.theta_samples, d.beta),
                                            kTwoPi * k / options.phi_samples));
    }
  }
  std::vector<PerspectiveSolution> found;
  for (const auto& s : best_starts(std::move(grid), options.newton_starts)) {
    const NewtonResult r = run_newton(d, s.x, true);
    if (auto sol = accept_root(d, r.x, true)) found.push_back(std::move(*sol));
  }
  return dedup_by_shape(std::move(found));
}

double AmbiguityFamily::max_pairwise_shape_distance() const {
  double m = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      m = std::max(m, shape_distance(samples[i].body, samples[j].body));
    }
  }
  return m;
}

bool AmbiguityFamily::demonstrates_distinct_bodies() const {
  return samples.size() >= 5 && max_pairwise_shape_distance() > kTolerances.family_distinct;
}

AmbiguityFamily trace_ambiguity_family(const FrameObservation& first, const FrameObservation& second,
                                       const std::vector<double>& theta1_grid, const FamilyOptions& options) {
  check_pair(first, second, 4);
  for (std::size_t i = 1; i < theta1_grid.size(); ++i) {
    if (!(theta1_grid[i] > theta1_grid[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "theta1 grid must be strictly increasing", i);
    }
  }
  const MeetLabels labels = default_meet_labels(first);
  const MeetData d = make_data(first, second, labels, {});

  AmbiguityFamily family;
  family.grid = theta1_grid;
  std::optional<Eigen::VectorXd> prev;

  auto emit = [&](double theta, const PerspectiveSolution& sol) {
    FamilySample s;
    s.theta1 = theta;
    s.body = sol.body;
    s.camera1 = sol.camera1;
    s.camera2 = sol.camera2;
    s.vars = sol.vars;
    s.residual = reprojection_residual(sol.body, sol.camera1, sol.camera2, first, second);
    family.samples.push_back(std::move(s));
  };

  for (std::size_t k = 0; k < theta1_grid.size(); ++k) {
    const double theta = theta1_grid[k];
    if (!on_arc(theta, d.alpha)) {
      family.failures.emplace_back(k, ErrorCode::OutOfArc);
      continue;
    }
    if (!prev) {
      std::optional<PerspectiveSolution> seed;
      if (options.initial) {
        Eigen::VectorXd x0 = options.initial->flatten();
        x0(0) = theta;
        const NewtonResult r = run_newton(d, x0, true);
        seed = accept_root(d, r.x, true);
      } else {
        auto roots = solve_at_theta1(first, second, theta, options);
        if (!roots.empty()) seed = roots.front();
      }
      if (!seed || reprojection_residual(seed->body, seed->camera1, seed->camera2, first, second) >=
                       kTolerances.family_residual) {
        family.failures.emplace_back(k, ErrorCode::NoConvergence);
        continue;
      }
      prev = seed->vars.flatten();
      emit(theta, *seed);
      continue;
    }

    std::optional<PerspectiveSolution> next;
    const double from = (*prev)(0);
    for (int depth = 0; depth <= options.bisections && !next; ++depth) {
      const int steps = 1 << depth;
      Eigen::VectorXd x = *prev;
      std::optional<PerspectiveSolution> step_sol;
      for (int s = 1; s <= steps; ++s) {
        x(0) = from + (theta - from) * static_cast<double>(s) / static_cast<double>(steps);
        const NewtonResult r = run_newton(d, x, true);
        step_sol = accept_root(d, r.x, true);
        if (!step_sol) break;
        x = r.x;
      }
      if (step_sol &&
          reprojection_residual(step_sol->body, step_sol->camera1, step_sol->camera2, first, second) <
              kTolerances.family_residual) {
        next = step_sol;
        prev = x;
      }
    }
    if (!next) {
      family.break_index = k;
      family.failures.emplace_back(k, ErrorCode::FamilyBreak);
      break;
    }
    emit(theta, *next);
  }
  return family;
}

AnchoredScene anchor_scene(const RigidBodyModel& body, const PoseParams& camera1, const PoseParams& camera2,
                           const MeetLabels& labels) {
  const Eigen::Vector3d a = body.position(labels.a);
  const Eigen::Vector3d b = body.position(labels.b);
  const double len = (b - a).norm();
  if (len < kTolerances.geometric_equality) throw Error(ErrorCode::DegenerateConfiguration, "anchor points coincide");
  const Eigen::Vector3d ex = (b - a) / len;
  const Eigen::Vector3d u = camera1.translation - a;
  Eigen::Vector3d ey = u - u.dot(ex) * ex;
  if (ey.norm() < kTolerances.geometric_equality) {
    throw Error(ErrorCode::DegenerateConfiguration, "first focal point lies on the anchor line");
  }
  ey.normalize();
  Eigen::Matrix3d q;
  q.row(0) = ex;
  q.row(1) = ey;
  q.row(2) = ex.cross(ey);
  const double s = 1.0 / len;
  auto map = [&](const Eigen::Vector3d& x) -> Eigen::Vector3d { return s * q * (x - a); };

  AnchoredScene out;
  std::vector<BodyPoint> pts;
  pts.push_back({labels.a, map(a)});
  pts.push_back({labels.b, map(b)});
  for (const auto& l : labels.constrained) pts.push_back({l, map(body.position(l))});
  out.body = RigidBodyModel(std::move(pts));
  out.camera1 = {q * camera1.rotation, map(camera1.translation)};
  out.camera2 = {q * camera2.rotation, map(camera2.translation)};

  const Eigen::Vector3d bb = Eigen::Vector3d::UnitX();
  const Eigen::Vector3d f1 = out.camera1.translation;
  const Eigen::Vector3d f2 = out.camera2.translation;
  out.vars.pose.theta1 = angle_between(-bb, f1 - bb);
  out.vars.pose.theta2 = angle_between(-bb, f2 - bb);
  out.vars.pose.phi2 = wrap_angle(std::atan2(f2.z(), f2.y()));
  for (const auto& l : labels.constrained) {
    const Eigen::Vector3d x = out.body.position(l);
    out.vars.lines.first.push_back((x - f1).norm());
    out.vars.lines.second.push_back((x - f2).norm());
  }
  return out;
}

double reprojection_residual(const RigidBodyModel& body, const PoseParams& camera1, const PoseParams& camera2,
                             const FrameObservation& first, const FrameObservation& second) {
  double worst = 0.0;
  for (const auto& [cam, obs] : {std::pair{&camera1, &first}, std::pair{&camera2, &second}}) {
    for (const auto& p : body.points()) {
      const Eigen::Vector3d ray = cam->rotation.transpose() * (p.position - cam->translation);
      worst = std::max(worst, angle_between(ray, obs->ray(p.label)));
    }
  }
  return worst;
}

}  // namespace rigid
