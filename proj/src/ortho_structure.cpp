#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "rigid_recover/errors.hpp"
#include "rigid_recover/ortho_solver.hpp"

namespace rigid {

SegmentKey::SegmentKey(Label p, Label q) {
  if (p == q) throw Error(ErrorCode::InvalidArgument, "segment endpoints must differ ('" + p + "')");
  if (q < p) std::swap(p, q);
  first = std::move(p);
  second = std::move(q);
}

void SegmentLengthSet::set(const Label& p, const Label& q, double squared_length) {
  if (!(squared_length > 0.0)) {
    throw Error(ErrorCode::NonPositiveLengths, "squared length of " + p + "-" + q + " must be positive");
  }
  squared_[SegmentKey(p, q)] = squared_length;
}

double SegmentLengthSet::at(const Label& p, const Label& q) const {
  auto it = squared_.find(SegmentKey(p, q));
  if (it == squared_.end()) throw Error(ErrorCode::LabelMismatch, "no length for segment " + p + "-" + q);
  return it->second;
}

bool SegmentLengthSet::contains(const Label& p, const Label& q) const {
  return squared_.count(SegmentKey(p, q)) > 0;
}

SegmentLengthSet SegmentLengthSet::from_body(const RigidBodyModel& body) {
  SegmentLengthSet out;
  const auto& pts = body.points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      out.set(pts[i].label, pts[j].label, (pts[i].position - pts[j].position).squaredNorm());
    }
  }
  return out;
}

std::vector<RigidBodyModel> lengths_to_structure(const FrameObservation& obs, const SegmentLengthSet& lengths) {
  if (obs.kind != ProjectionKind::Orthogonal) throw Error(ErrorCode::WrongKind, "orthogonal observation required");
  const std::size_t n = obs.size();
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "empty observation");
  if (n > 6) throw Error(ErrorCode::InvalidArgument, "depth-sign enumeration supports at most 6 points");

  double max_sq = 0.0;
  for (const auto& [k, v] : lengths.entries()) max_sq = std::max(max_sq, v);
  const double slack = kTolerances.radicand_slack * std::max(1.0, max_sq);
  const double tol = kTolerances.depth_closure * std::max(1.0, std::sqrt(max_sq));

  // Vertical extent of every segment.
  Eigen::MatrixXd extent = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double r = lengths.at(obs.labels[i], obs.labels[j]) - (obs.image[i] - obs.image[j]).squaredNorm();
      if (r < 0.0) {
        if (r < -slack) {
          throw Error(ErrorCode::InconsistentLengths,
                      "segment " + obs.labels[i] + "-" + obs.labels[j] + " shorter than its projection in frame " +
                          std::to_string(obs.frame));
        }
        r = 0.0;
      }
      extent(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::sqrt(r);
      extent(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = std::sqrt(r);
    }
  }

  std::vector<Eigen::VectorXd> depths;
  const unsigned combos = 1u << (n - 1);
  for (unsigned mask = 0; mask < combos; ++mask) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t j = 1; j < n; ++j) {
      const double sign = (mask >> (j - 1)) & 1u ? -1.0 : 1.0;
      z(static_cast<Eigen::Index>(j)) = sign * extent(0, static_cast<Eigen::Index>(j));
    }
    bool ok = true;
    for (std::size_t i = 1; i < n && ok; ++i) {
      for (std::size_t j = i + 1; j < n && ok; ++j) {
        const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
        ok = std::abs(std::abs(z(a) - z(b)) - extent(a, b)) <= tol;
      }
    }
    if (!ok) continue;
    bool dup = false;
    for (const auto& d : depths) dup = dup || (d - z).cwiseAbs().maxCoeff() <= tol;
    if (!dup) depths.push_back(std::move(z));
  }
  if (depths.empty()) {
    throw Error(ErrorCode::InconsistentLengths,
                "no depth assignment closes in frame " + std::to_string(obs.frame), static_cast<std::size_t>(obs.frame));
  }

  // Positive first non-zero depth first; its mirror follows.
  std::sort(depths.begin(), depths.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (a(i) != b(i)) return a(i) > b(i);
    }
    return false;
  });

  std::vector<RigidBodyModel> out;
  for (const auto& z : depths) {
    std::vector<BodyPoint> pts;
    for (std::size_t i = 0; i < n; ++i) {
      pts.push_back({obs.labels[i], Eigen::Vector3d(obs.image[i].x(), obs.image[i].y(), z(static_cast<Eigen::Index>(i)))});
    }
    out.emplace_back(std::move(pts));
  }
  return out;
}

std::vector<PoseParams> extract_motion(const std::vector<RigidBodyModel>& structures) {
  if (structures.size() < 2) throw Error(ErrorCode::InvalidArgument, "motion extraction needs at least two frames");
  const auto labels = structures[0].labels();
  const Eigen::Matrix3Xd first = structures[0].matrix();
  const Eigen::Vector3d centroid = first.rowwise().mean();
  const double extent = std::max(1.0, (first.colwise() - centroid).colwise().norm().maxCoeff());
  const double tol = kTolerances.motion_residual * extent;

  std::vector<PoseParams> out{PoseParams::identity()};
  for (std::size_t i = 1; i < structures.size(); ++i) {
    Eigen::Matrix3Xd target(3, static_cast<Eigen::Index>(labels.size()));
    for (std::size_t j = 0; j < labels.size(); ++j) {
      target.col(static_cast<Eigen::Index>(j)) = structures[i].position(labels[j]);
    }
    if (structures[i].size() != labels.size()) {
      throw Error(ErrorCode::LabelMismatch, "frame structures carry different labels");
    }
    Alignment a = procrustes_align(first, target);
    if (a.rms > tol) {
      Eigen::Matrix3Xd mirrored = target;
      mirrored.row(2) *= -1.0;
      if (procrustes_align(first, mirrored).rms <= tol) {
        throw Error(ErrorCode::MirrorMismatch,
                    "frame " + std::to_string(i + 1) + " aligns only through a reflection", i, a.rms);
      }
      throw Error(ErrorCode::DegenerateConfiguration,
                  "frame " + std::to_string(i + 1) + " structure is not congruent to frame 1", i, a.rms);
    }
    a.pose.translation.z() = 0.0;
    out.push_back(a.pose);
  }
  return out;
}

RigidBodyModel depth_anchored_structure(const RigidBodyModel& body, const PoseParams& pose) {
  RigidBodyModel moved = transform_body(body, pose);
  if (moved.empty()) return moved;
  const double z0 = moved.points().front().position.z();
  std::vector<BodyPoint> pts;
  for (const auto& p : moved.points()) {
    pts.push_back({p.label, Eigen::Vector3d(p.position.x(), p.position.y(), p.position.z() - z0)});
  }
  return RigidBodyModel(std::move(pts));
}

}  // namespace rigid
