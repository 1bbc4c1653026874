#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

namespace rigid {

using Label = std::string;

struct BodyPoint {
  Label label;
  Eigen::Vector3d position;
};

// Labeled 3D points of a traced object. Labels are unique.
class RigidBodyModel {
 public:
  RigidBodyModel() = default;
  explicit RigidBodyModel(std::vector<BodyPoint> points);

  const std::vector<BodyPoint>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  std::vector<Label> labels() const;
  std::optional<std::size_t> index_of(const Label& label) const;
  const Eigen::Vector3d& position(const Label& label) const;

  // Positions as columns, in stored order.
  Eigen::Matrix3Xd matrix() const;

 private:
  std::vector<BodyPoint> points_;
};

// Rigid transform x -> rotation * x + translation.
//
// For orthogonal frames the pose maps body coordinates into camera
// coordinates. For perspective frames the rotation is the camera-to-world
// orientation and the translation is the focal point in world coordinates.
struct PoseParams {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static PoseParams identity() { return {}; }
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  bool is_proper_rotation(double tol) const;
};

enum class ProjectionKind { Orthogonal, Perspective };

const char* to_string(ProjectionKind kind);
ProjectionKind projection_from_string(const std::string& name);

// Per-frame measurements. Orthogonal frames fill `image`, perspective frames
// fill `rays` (unit vectors in camera coordinates); `labels` indexes both.
struct FrameObservation {
  ProjectionKind kind = ProjectionKind::Orthogonal;
  int frame = 1;
  std::vector<Label> labels;
  std::vector<Eigen::Vector2d> image;
  std::vector<Eigen::Vector3d> rays;

  std::size_t size() const { return labels.size(); }
  std::optional<std::size_t> index_of(const Label& label) const;
  const Eigen::Vector2d& image_point(const Label& label) const;
  const Eigen::Vector3d& ray(const Label& label) const;
};

FrameObservation project_orthogonal(const RigidBodyModel& body, const PoseParams& pose, int frame = 1);
FrameObservation project_perspective(const RigidBodyModel& body, const PoseParams& camera, int frame = 1);

// Angle between the rays of two labels, in [0, pi].
double view_angle(const FrameObservation& obs, const Label& p, const Label& q);

// Angle between two directions, in [0, pi]; arguments need not be unit.
double angle_between(const Eigen::Vector3d& u, const Eigen::Vector3d& v);

struct Alignment {
  PoseParams pose;
  double rms = 0.0;
};

// Proper rotation + translation minimizing sum |R*source + t - target|^2.
Alignment procrustes_align(const Eigen::Matrix3Xd& source, const Eigen::Matrix3Xd& target);

// Scale-invariant congruence gap between two bodies with the same labels.
// Zero iff the bodies are similar (reflection included).
double shape_distance(const RigidBodyModel& a, const RigidBodyModel& b);

RigidBodyModel transform_body(const RigidBodyModel& body, const PoseParams& pose);

// Reflection through the z = 0 plane.
RigidBodyModel reflect_depth(const RigidBodyModel& body);

// Uniform scaling about the origin.
RigidBodyModel scale_body(const RigidBodyModel& body, double factor);

}  // namespace rigid
