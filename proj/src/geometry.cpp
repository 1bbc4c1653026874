#include "rigid_recover/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "rigid_recover/errors.hpp"
#include "rigid_recover/tolerances.hpp"

namespace rigid {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::CoincidentPoint: return "CoincidentPoint";
    case ErrorCode::WrongKind: return "WrongKind";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::LabelMismatch: return "LabelMismatch";
    case ErrorCode::InvalidInstance: return "InvalidInstance";
    case ErrorCode::NegativeRadicand: return "NegativeRadicand";
    case ErrorCode::NoSolution: return "NoSolution";
    case ErrorCode::DegenerateImages: return "DegenerateImages";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::NonPositiveLengths: return "NonPositiveLengths";
    case ErrorCode::InconsistentLengths: return "InconsistentLengths";
    case ErrorCode::MirrorMismatch: return "MirrorMismatch";
    case ErrorCode::OutOfArc: return "OutOfArc";
    case ErrorCode::AngleMismatch: return "AngleMismatch";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::FamilyBreak: return "FamilyBreak";
    case ErrorCode::GuardExhausted: return "GuardExhausted";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InvariantError: return "InvariantError";
  }
  return "Unknown";
}

RigidBodyModel::RigidBodyModel(std::vector<BodyPoint> points) : points_(std::move(points)) {
  std::set<Label> seen;
  for (const auto& p : points_) {
    if (!seen.insert(p.label).second) {
      throw Error(ErrorCode::LabelMismatch, "duplicate label '" + p.label + "'");
    }
  }
}

std::vector<Label> RigidBodyModel::labels() const {
  std::vector<Label> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(p.label);
  return out;
}

std::optional<std::size_t> RigidBodyModel::index_of(const Label& label) const {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].label == label) return i;
  }
  return std::nullopt;
}

const Eigen::Vector3d& RigidBodyModel::position(const Label& label) const {
  auto idx = index_of(label);
  if (!idx) throw Error(ErrorCode::LabelMismatch, "no point labeled '" + label + "'");
  return points_[*idx].position;
}

Eigen::Matrix3Xd RigidBodyModel::matrix() const {
  Eigen::Matrix3Xd m(3, points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) m.col(i) = points_[i].position;
  return m;
}

bool PoseParams::is_proper_rotation(double tol) const {
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

const char* to_string(ProjectionKind kind) {
  return kind == ProjectionKind::Orthogonal ? "orthogonal" : "perspective";
}

ProjectionKind projection_from_string(const std::string& name) {
  if (name == "orthogonal") return ProjectionKind::Orthogonal;
  if (name == "perspective") return ProjectionKind::Perspective;
  throw Error(ErrorCode::InvalidArgument, "unknown projection '" + name + "'");
}

std::optional<std::size_t> FrameObservation::index_of(const Label& label) const {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels.begin());
}

const Eigen::Vector2d& FrameObservation::image_point(const Label& label) const {
  if (kind != ProjectionKind::Orthogonal) throw Error(ErrorCode::WrongKind, "image points need an orthogonal frame");
  auto idx = index_of(label);
  if (!idx) throw Error(ErrorCode::LabelMismatch, "no observation labeled '" + label + "'");
  return image[*idx];
}

const Eigen::Vector3d& FrameObservation::ray(const Label& label) const {
  if (kind != ProjectionKind::Perspective) throw Error(ErrorCode::WrongKind, "rays need a perspective frame");
  auto idx = index_of(label);
  if (!idx) throw Error(ErrorCode::LabelMismatch, "no observation labeled '" + label + "'");
  return rays[*idx];
}

FrameObservation project_orthogonal(const RigidBodyModel& body, const PoseParams& pose, int frame) {
  if (body.empty()) throw Error(ErrorCode::InvalidArgument, "cannot project an empty body");
  FrameObservation obs;
  obs.kind = ProjectionKind::Orthogonal;
  obs.frame = frame;
  for (const auto& p : body.points()) {
    obs.labels.push_back(p.label);
    obs.image.push_back(pose.apply(p.position).head<2>());
  }
  return obs;
}

FrameObservation project_perspective(const RigidBodyModel& body, const PoseParams& camera, int frame) {
  if (body.empty()) throw Error(ErrorCode::InvalidArgument, "cannot project an empty body");
  FrameObservation obs;
  obs.kind = ProjectionKind::Perspective;
  obs.frame = frame;
  for (const auto& p : body.points()) {
    const Eigen::Vector3d offset = p.position - camera.translation;
    const double dist = offset.norm();
    if (dist < kTolerances.coincident_point) {
      throw Error(ErrorCode::CoincidentPoint, "point '" + p.label + "' coincides with the focal point");
    }
    obs.labels.push_back(p.label);
    obs.rays.push_back((camera.rotation.transpose() * offset).normalized());
  }
  return obs;
}

double angle_between(const Eigen::Vector3d& u, const Eigen::Vector3d& v) {
  // atan2 form keeps precision near 0 and pi.
  return std::atan2(u.cross(v).norm(), u.dot(v));
}

double view_angle(const FrameObservation& obs, const Label& p, const Label& q) {
  if (obs.kind != ProjectionKind::Perspective) {
    throw Error(ErrorCode::WrongKind, "view_angle needs a perspective observation");
  }
  return angle_between(obs.ray(p), obs.ray(q));
}

Alignment procrustes_align(const Eigen::Matrix3Xd& source, const Eigen::Matrix3Xd& target) {
  if (source.cols() != target.cols()) {
    throw Error(ErrorCode::InvalidArgument, "point sets differ in size");
  }
  if (source.cols() < 3) {
    throw Error(ErrorCode::DegenerateConfiguration, "need at least 3 correspondences");
  }
  const Eigen::Vector3d mu_s = source.rowwise().mean();
  const Eigen::Vector3d mu_t = target.rowwise().mean();
  const Eigen::Matrix3Xd cs = source.colwise() - mu_s;
  const Eigen::Matrix3Xd ct = target.colwise() - mu_t;

  Eigen::JacobiSVD<Eigen::Matrix3Xd> spread(cs);
  const auto& sv = spread.singularValues();
  if (sv(0) == 0.0 || sv(1) <= kTolerances.geometric_equality * sv(0)) {
    throw Error(ErrorCode::DegenerateConfiguration, "correspondences are collinear");
  }

  const Eigen::Matrix3d cov = ct * cs.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  Alignment out;
  out.pose.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  out.pose.translation = mu_t - out.pose.rotation * mu_s;
  const Eigen::Matrix3Xd diff = (out.pose.rotation * source).colwise() + out.pose.translation - target;
  out.rms = std::sqrt(diff.squaredNorm() / static_cast<double>(source.cols()));
  return out;
}

namespace {

std::vector<double> sorted_pair_distances(const RigidBodyModel& body) {
  std::vector<double> d;
  const auto& pts = body.points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      d.push_back((pts[i].position - pts[j].position).norm());
    }
  }
  std::sort(d.begin(), d.end());
  return d;
}

}  // namespace

double shape_distance(const RigidBodyModel& a, const RigidBodyModel& b) {
  auto la = a.labels();
  auto lb = b.labels();
  std::sort(la.begin(), la.end());
  std::sort(lb.begin(), lb.end());
  if (la != lb) throw Error(ErrorCode::LabelMismatch, "bodies carry different label sets");

  const auto da = sorted_pair_distances(a);
  const auto db = sorted_pair_distances(b);
  const auto va = Eigen::Map<const Eigen::VectorXd>(da.data(), static_cast<Eigen::Index>(da.size()));
  const auto vb = Eigen::Map<const Eigen::VectorXd>(db.data(), static_cast<Eigen::Index>(db.size()));
  const double na = va.norm();
  const double nb = vb.norm();
  if (na == 0.0 || nb == 0.0) {
    return (na == 0.0 && nb == 0.0) ? 0.0 : 1.0;
  }
  return (va / na - vb / nb).norm();
}

RigidBodyModel transform_body(const RigidBodyModel& body, const PoseParams& pose) {
  std::vector<BodyPoint> pts;
  pts.reserve(body.size());
  for (const auto& p : body.points()) pts.push_back({p.label, pose.apply(p.position)});
  return RigidBodyModel(std::move(pts));
}

RigidBodyModel reflect_depth(const RigidBodyModel& body) {
  std::vector<BodyPoint> pts;
  pts.reserve(body.size());
  for (const auto& p : body.points()) {
    pts.push_back({p.label, Eigen::Vector3d(p.position.x(), p.position.y(), -p.position.z())});
  }
  return RigidBodyModel(std::move(pts));
}

RigidBodyModel scale_body(const RigidBodyModel& body, double factor) {
  std::vector<BodyPoint> pts;
  pts.reserve(body.size());
  for (const auto& p : body.points()) pts.push_back({p.label, factor * p.position});
  return RigidBodyModel(std::move(pts));
}

}  // namespace rigid
