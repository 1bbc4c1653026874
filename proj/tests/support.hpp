#pragma once

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rigid_recover/errors.hpp"
#include "rigid_recover/geometry.hpp"
#include "rigid_recover/ortho_solver.hpp"

namespace testing {

constexpr double kPi = 3.14159265358979323846;

inline Eigen::Matrix3d rot(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

inline rigid::RigidBodyModel make_body(const std::vector<std::pair<std::string, Eigen::Vector3d>>& pts) {
  std::vector<rigid::BodyPoint> out;
  for (const auto& [l, p] : pts) out.push_back({l, p});
  return rigid::RigidBodyModel(std::move(out));
}

// Largest relative error of recovered squared lengths against the body's.
inline double length_error(const rigid::SegmentLengthSet& got, const rigid::RigidBodyModel& truth) {
  const auto& pts = truth.points();
  double worst = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double t = (pts[i].position - pts[j].position).squaredNorm();
      worst = std::max(worst, std::abs(got.at(pts[i].label, pts[j].label) - t) / t);
    }
  }
  return worst;
}

inline double best_length_error(const std::vector<rigid::RecoveryResult>& sols, const rigid::RigidBodyModel& truth) {
  double best = INFINITY;
  for (const auto& s : sols) best = std::min(best, length_error(s.lengths, truth));
  return best;
}

// Rotation from three uniform angles, independent of the library sampler.
inline Eigen::Matrix3d euler(double a, double b, double c) {
  return rot(Eigen::Vector3d::UnitZ(), a) * rot(Eigen::Vector3d::UnitY(), b) * rot(Eigen::Vector3d::UnitZ(), c);
}

inline Eigen::Matrix3d random_euler(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
  return euler(u(rng), u(rng), u(rng));
}

template <typename F>
bool throws_code(F&& f, rigid::ErrorCode code) {
  try {
    f();
  } catch (const rigid::Error& e) {
    return e.code() == code;
  }
  return false;
}

}  // namespace testing
