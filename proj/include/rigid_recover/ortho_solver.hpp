#pragma once

#include <Eigen/Core>
#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rigid_recover/geometry.hpp"
#include "rigid_recover/tolerances.hpp"

namespace rigid {

// Unordered label pair, stored with first < second.
struct SegmentKey {
  Label first;
  Label second;

  SegmentKey() = default;
  SegmentKey(Label p, Label q);
  auto operator<=>(const SegmentKey&) const = default;
  std::string name() const { return first + "-" + second; }
};

// Squared true segment lengths keyed by label pair. Values are positive.
class SegmentLengthSet {
 public:
  void set(const Label& p, const Label& q, double squared_length);
  double at(const Label& p, const Label& q) const;
  bool contains(const Label& p, const Label& q) const;
  std::size_t size() const { return squared_.size(); }
  const std::map<SegmentKey, double>& entries() const { return squared_; }

  static SegmentLengthSet from_body(const RigidBodyModel& body);

 private:
  std::map<SegmentKey, double> squared_;
};

using Triple = std::array<double, 3>;

// Which of the three radicals carries the minus sign.
enum class TriangleVariant { NegFirst, NegSecond, NegThird };

inline constexpr std::array<TriangleVariant, 3> kTriangleVariants = {
    TriangleVariant::NegFirst, TriangleVariant::NegSecond, TriangleVariant::NegThird};

// Triangle (P, Q, R) with side order (QR, PR, PQ).
struct TriangleRelation {
  std::array<Label, 3> labels;
  TriangleVariant variant = TriangleVariant::NegThird;

  std::array<SegmentKey, 3> sides() const;
};

// Signed value of +-sqrt(L1^2-l1^2) +- sqrt(L2^2-l2^2) +- sqrt(L3^2-l3^2), one
// minus sign placed by `variant`. Each radicand is the vertical extent of a
// side, so the relation holds iff the longest depth offset is the sum of the
// other two. Radicands in [-slack, 0] clamp to 0; lower throws NegativeRadicand.
double triangle_residual(const Triple& true_sq, const Triple& proj_sq, TriangleVariant variant,
                         double slack = kTolerances.radicand_slack);

// Linear part of the twice-squared triangle relation for one frame:
//   Q(L) + constant = coefficients . (L1^2, L2^2, L3^2)
// with Q(v) = v1^2 + v2^2 + v3^2 - 2 v1 v2 - 2 v1 v3 - 2 v2 v3 evaluated on the
// unknown squares and constant = Q(projected squares).
struct SquaredRow {
  Triple coefficients{};
  double constant = 0.0;
};

SquaredRow squared_triangle_row(const Triple& proj_sq);

// Q(true_sq - proj_sq): the twice-squared relation, zero on every variant.
double squared_triangle_gap(const Triple& true_sq, const Triple& proj_sq);

// Symmetric quartic Q on three squared lengths.
double triangle_quartic(const Triple& sq);

enum class SystemKind { Linear, Quadratic };

// Rows are coefficients . x = rhs (linear), or
// quartic(x restricted to row_triangles[r]) + rhs[r] - coefficients.row(r) . x = 0 (quadratic).
struct SquaredSystem {
  SystemKind kind = SystemKind::Linear;
  std::vector<SegmentKey> unknowns;
  Eigen::MatrixXd coefficients;
  Eigen::VectorXd rhs;
  std::vector<std::array<int, 3>> row_triangles;

  Eigen::VectorXd residual(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const;
};

// One twice-squared row per (frame, triangle).
SquaredSystem build_quadratic_system(const std::vector<FrameObservation>& frames,
                                     const std::vector<std::array<Label, 3>>& triangles,
                                     const std::vector<SegmentKey>& unknowns);

// Rows of frames 2..k minus the frame-1 row, per triangle; linear in the squares.
SquaredSystem build_linearized_system(const std::vector<FrameObservation>& frames,
                                      const std::vector<std::array<Label, 3>>& triangles,
                                      const std::vector<SegmentKey>& unknowns);

struct RecoveryResult {
  SegmentLengthSet lengths;
  // Per frame, in frame-local coordinates: image x, y and a depth with the
  // first label at depth 0.
  std::vector<RigidBodyModel> structures;
  // Per frame, frame-1 structure onto frame-i structure; motions[0] is the
  // identity. Depth translation is reported as 0.
  std::vector<PoseParams> motions;
  // True when the depth-reflected twin differs from the primary branch and is
  // carried in mirror_structures / mirror_motions.
  bool mirror_flag = false;
  std::vector<RigidBodyModel> mirror_structures;
  std::vector<PoseParams> mirror_motions;
  // Largest unsquared triangle-relation violation (best variant per triangle
  // and frame), in length units.
  double residual = 0.0;
  // False when the squared system's Jacobian is singular at this root, i.e.
  // the root is one member of a continuum of solutions.
  bool isolated = true;
};

enum class OrthoConfig { P3F3, P4F2, P3F4, P4F3, P5F2 };

const char* to_string(OrthoConfig config);
OrthoConfig ortho_config_from_string(const std::string& name);
int config_points(OrthoConfig config);
int config_frames(OrthoConfig config);

struct QuadraticSolveOptions {
  std::vector<double> start_scales = {1.0, 1.25, 1.5, 2.0, 4.0};
  int random_starts = 20;
  unsigned long long seed = 0x5eedULL;
};

std::vector<RecoveryResult> solve_p3f3(const std::vector<FrameObservation>& frames,
                                       const QuadraticSolveOptions& options = {});
std::vector<RecoveryResult> solve_p4f2(const std::vector<FrameObservation>& frames,
                                       const QuadraticSolveOptions& options = {});
std::vector<RecoveryResult> solve_p3f4_linear(const std::vector<FrameObservation>& frames);
std::vector<RecoveryResult> solve_p4f3_linear(const std::vector<FrameObservation>& frames);
std::vector<RecoveryResult> solve_p5f2_linear(const std::vector<FrameObservation>& frames);

std::vector<RecoveryResult> recover_orthogonal(OrthoConfig config, const std::vector<FrameObservation>& frames);

// Depth assignments consistent with every pairwise |dz| = sqrt(L^2 - l^2).
// The first label (observation order) sits at depth 0. Mirror twins are both
// returned; the first result has its first non-zero depth positive.
std::vector<RigidBodyModel> lengths_to_structure(const FrameObservation& obs, const SegmentLengthSet& lengths);

// Pose i maps structures[0] onto structures[i]; result[0] is the identity.
std::vector<PoseParams> extract_motion(const std::vector<RigidBodyModel>& structures);

// Largest best-variant residual over all point triples and frames.
double unsquared_residual(const std::vector<FrameObservation>& frames, const SegmentLengthSet& lengths);

// Frame-local structure a solver should recover from a known body and pose.
RigidBodyModel depth_anchored_structure(const RigidBodyModel& body, const PoseParams& pose);

}  // namespace rigid
