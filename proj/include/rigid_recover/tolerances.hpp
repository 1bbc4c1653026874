#pragma once

namespace rigid {

// Every numeric threshold used by the library lives here.
struct Tolerances {
  double orthonormality = 1e-12;
  double geometric_equality = 1e-9;
  double unit_ray = 1e-12;
  double coincident_point = 1e-12;

  // Radicands in [-radicand_slack, 0] are treated as 0.
  double radicand_slack = 1e-12;
  // Unsquared triangle relation acceptance, relative to the length scale.
  double variant_filter = 1e-7;
  // Depth closure in lengths_to_structure, relative to the length scale.
  double depth_closure = 1e-7;
  double motion_residual = 1e-7;
  double root_dedup = 1e-6;
  double condition_limit = 1e10;
  double min_image_area = 1e-10;

  double meet_converge = 1e-12;
  double meet_accept = 1e-9;
  double shape_dedup = 1e-6;
  double family_residual = 1e-8;
  double family_distinct = 1e-3;
  // Roots whose Jacobian is closer than this to singular are not isolated.
  double isolation_limit = 1e-10;
};

inline constexpr Tolerances kTolerances{};

}  // namespace rigid
