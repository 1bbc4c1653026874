#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "rigid_recover/geometry.hpp"

namespace rigid {

struct MotionMagnitude {
  double max_rotation = 3.141592653589793;  // radians
  double max_translation = 1.0;              // length units
};

// Resampling thresholds, absolute units.
struct DegeneracyGuard {
  double min_volume = 1e-3;  // every 4-point tetrahedron (bodies with >= 4 points)
  double min_area = 1e-3;    // every body triangle and every image triangle
};

struct SynthSpec {
  int n_points = 4;
  int n_frames = 2;
  ProjectionKind projection = ProjectionKind::Orthogonal;
  std::uint64_t seed = 0;
  double body_scale = 1.0;
  MotionMagnitude motion;
  double noise_sigma = 0.0;
  DegeneracyGuard guard;
};

struct Scene {
  ProjectionKind projection = ProjectionKind::Orthogonal;
  RigidBodyModel body;
  std::vector<PoseParams> poses;
  std::vector<FrameObservation> observations;
};

// Deterministic in spec.seed. Body points are uniform in [-s, s]^3 with labels
// A, B, C, ...; orthogonal poses are random rigid motions; perspective cameras
// sit 3s to 3s + max_translation from the centroid and look at it.
Scene generate(const SynthSpec& spec);

// Reflection through z = 0.
RigidBodyModel mirror_body(const RigidBodyModel& body);

// Uniformly distributed rotation with its angle rescaled into [0, max_angle].
Eigen::Matrix3d random_rotation(std::mt19937_64& rng, double max_angle);

// Unsigned volume of the tetrahedron spanned by four points.
double tetrahedron_volume(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                          const Eigen::Vector3d& d);

}  // namespace rigid
