#pragma once

#include <Eigen/Core>
#include <optional>
#include <utility>
#include <vector>

#include "rigid_recover/errors.hpp"
#include "rigid_recover/geometry.hpp"

namespace rigid {

// Two-frame perspective recovery in a fixed gauge: A = (0,0,0), B = (1,0,0),
// and the first focal point f1 in the plane z = 0 with y > 0. The unit edge
// AB is a convention; perspective data carries no scale.

// theta1 = angle ABf1, theta2 = angle ABf2, phi2 = rotation of f2 about AB.
struct PoseVars {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double phi2 = 0.0;
};

// Ray parameters t of the constrained points, one per label and frame.
struct LineParams {
  std::vector<double> first;
  std::vector<double> second;
};

struct MeetVariables {
  PoseVars pose;
  LineParams lines;

  // [theta1, theta2, phi2, first..., second...]
  Eigen::VectorXd flatten() const;
  static MeetVariables unflatten(const Eigen::VectorXd& x);
};

// Which labels anchor the gauge and which are met by ray pairs.
struct MeetLabels {
  Label a;
  Label b;
  std::vector<Label> constrained;
};

// Sorted labels of the observation: the first two anchor, the rest are constrained.
MeetLabels default_meet_labels(const FrameObservation& obs);

enum class Handedness { Proper, Reflected };

struct HandednessPair {
  Handedness first = Handedness::Proper;
  Handedness second = Handedness::Proper;
  bool operator==(const HandednessPair&) const = default;
};

// f1 in z = 0 on the arc through A and B that subtends `observed_angle`,
// positioned by theta1 = angle ABf1. Throws OutOfArc unless
// theta1 > 0 and theta1 + observed_angle < pi.
Eigen::Vector3d place_f1(double theta1, double observed_angle);

// place_f1(theta2, observed_angle) rotated by phi2 about the AB (x) axis.
Eigen::Vector3d place_f2(double theta2, double phi2, double observed_angle);

// Camera-to-world rotation taking the camera rays to A and B onto the world
// directions from `focal`. The reflected completion flips the third axis and
// has determinant -1. Throws AngleMismatch when the ray angle disagrees with
// the world angle at the focal point by more than 1e-9.
Eigen::Matrix3d camera_orientation(const Eigen::Vector3d& focal, const Eigen::Vector3d& ray_a,
                                   const Eigen::Vector3d& ray_b, Handedness handedness = Handedness::Proper);

// Per constrained label X: (f1 + t'_X v'_X) - (f2 + t''_X v''_X), where v are
// the observed rays carried into world coordinates.
Eigen::VectorXd meet_residual(const MeetVariables& vars, const FrameObservation& first,
                              const FrameObservation& second, const MeetLabels& labels,
                              HandednessPair handedness = {});

// Jacobian of meet_residual with respect to MeetVariables::flatten(), by
// forward-mode automatic differentiation.
Eigen::MatrixXd meet_jacobian(const MeetVariables& vars, const FrameObservation& first,
                              const FrameObservation& second, const MeetLabels& labels,
                              HandednessPair handedness = {});

struct PerspectiveSolution {
  RigidBodyModel body;    // gauge-fixed, |AB| = 1
  PoseParams camera1;     // camera-to-world rotation, focal point
  PoseParams camera2;
  PoseParams relative;    // camera 2 expressed in camera-1 coordinates
  MeetVariables vars;
  HandednessPair handedness;  // branch the root was found on
  double residual = 0.0;      // infinity norm of meet_residual
};

struct FivePointOptions {
  int theta_samples = 8;
  int phi_samples = 16;
  int newton_starts = 40;  // best-scoring grid starts refined per branch
};

// Roots of the 9x9 ray-meeting system over all four handedness branches.
// Reflected-reflected roots are mirrored back to proper cameras; mixed
// branches describe a mirrored camera and are dropped. Throws NoConvergence
// (value() = best residual) when nothing is accepted.
std::vector<PerspectiveSolution> solve_five_point_two_frame(const FrameObservation& first,
                                                            const FrameObservation& second,
                                                            const FivePointOptions& options = {});

// Newton from a given start; throws NoConvergence if the result is not accepted.
PerspectiveSolution refine_two_frame(const FrameObservation& first, const FrameObservation& second,
                                     const MeetVariables& start, HandednessPair handedness = {});

struct FamilySample {
  double theta1 = 0.0;
  RigidBodyModel body;
  PoseParams camera1;
  PoseParams camera2;
  MeetVariables vars;
  double residual = 0.0;  // reprojection: largest ray-angle error, radians
};

struct AmbiguityFamily {
  std::vector<double> grid;
  std::vector<FamilySample> samples;
  std::vector<std::pair<std::size_t, ErrorCode>> failures;  // grid index, reason
  std::optional<std::size_t> break_index;                   // FamilyBreak position

  double max_pairwise_shape_distance() const;
  // At least 5 samples with pairwise shape distance above 1e-3 somewhere.
  bool demonstrates_distinct_bodies() const;
};

struct FamilyOptions {
  // Replaces the multistart at the first grid point when set.
  std::optional<MeetVariables> initial;
  int bisections = 6;
  int theta_samples = 16;
  int phi_samples = 32;
  int newton_starts = 30;
};

// Four labeled points in two frames: for each grid theta1 (strictly
// increasing), f1 is frozen and the 6x6 system in (theta2, phi2, four t's) is
// solved, seeded by the previous grid solution. A failed continuation step is
// bisected up to options.bisections times before the family breaks.
AmbiguityFamily trace_ambiguity_family(const FrameObservation& first, const FrameObservation& second,
                                       const std::vector<double>& theta1_grid, const FamilyOptions& options = {});

// Every accepted root of the fixed-theta1 system found by multistart.
std::vector<PerspectiveSolution> solve_at_theta1(const FrameObservation& first, const FrameObservation& second,
                                                 double theta1, const FamilyOptions& options = {});

// A known scene expressed in the solver's gauge.
struct AnchoredScene {
  RigidBodyModel body;
  PoseParams camera1;
  PoseParams camera2;
  MeetVariables vars;
};

AnchoredScene anchor_scene(const RigidBodyModel& body, const PoseParams& camera1, const PoseParams& camera2,
                           const MeetLabels& labels);

// Largest angle between observed rays and rays re-projected from body through
// the two cameras.
double reprojection_residual(const RigidBodyModel& body, const PoseParams& camera1, const PoseParams& camera2,
                             const FrameObservation& first, const FrameObservation& second);

}  // namespace rigid
