#include "rigid_recover/synth.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <string>

#include "rigid_recover/errors.hpp"

namespace rigid {

namespace {

constexpr int kMaxAttempts = 1000;

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-12);
  return v.normalized();
}

double triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

double triangle_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const Eigen::Vector2d u = b - a, v = c - a;
  return 0.5 * std::abs(u.x() * v.y() - u.y() * v.x());
}

bool body_passes(const std::vector<Eigen::Vector3d>& p, const DegeneracyGuard& guard) {
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        if (triangle_area(p[i], p[j], p[k]) < guard.min_area) return false;
        for (std::size_t l = k + 1; l < n; ++l) {
          if (tetrahedron_volume(p[i], p[j], p[k], p[l]) < guard.min_volume) return false;
        }
      }
  return true;
}

bool image_passes(const FrameObservation& obs, const DegeneracyGuard& guard, double depth_scale) {
  const std::size_t n = obs.size();
  std::vector<Eigen::Vector2d> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (obs.kind == ProjectionKind::Orthogonal) {
      pts[i] = obs.image[i];
    } else {
      const Eigen::Vector3d& r = obs.rays[i];
      if (r.z() <= 0.0) return false;
      // Normalized image plane scaled back to the body's distance.
      pts[i] = depth_scale * r.head<2>() / r.z();
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        if (triangle_area(pts[i], pts[j], pts[k]) < guard.min_area) return false;
      }
  return true;
}

Eigen::Vector3d perturb_ray(const Eigen::Vector3d& ray, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  Eigen::Vector3d axis = random_unit(rng);
  axis = (axis - axis.dot(ray) * ray);
  if (axis.norm() < 1e-12) return ray;
  const double angle = std::abs(n(rng));
  return (Eigen::AngleAxisd(angle, axis.normalized()) * ray).normalized();
}

PoseParams look_at_camera(const Eigen::Vector3d& focal, const Eigen::Vector3d& target, std::mt19937_64& rng) {
  const Eigen::Vector3d forward = (target - focal).normalized();
  Eigen::Vector3d side = random_unit(rng);
  side = side - side.dot(forward) * forward;
  while (side.norm() < 1e-6) {
    side = random_unit(rng);
    side = side - side.dot(forward) * forward;
  }
  side.normalize();
  PoseParams cam;
  cam.rotation.col(0) = side;
  cam.rotation.col(1) = forward.cross(side);
  cam.rotation.col(2) = forward;
  cam.translation = focal;
  return cam;
}

}  // namespace

Eigen::Matrix3d random_rotation(std::mt19937_64& rng, double max_angle) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q;
  do {
    q = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng));
  } while (q.norm() < 1e-12);
  q.normalize();
  const Eigen::AngleAxisd aa(q);  // angle in [0, pi]
  const double pi = 3.141592653589793;
  return Eigen::AngleAxisd(aa.angle() * std::min(max_angle, pi) / pi, aa.axis()).toRotationMatrix();
}

double tetrahedron_volume(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                          const Eigen::Vector3d& d) {
  return std::abs((b - a).dot((c - a).cross(d - a))) / 6.0;
}

RigidBodyModel mirror_body(const RigidBodyModel& body) { return reflect_depth(body); }

Scene generate(const SynthSpec& spec) {
  if (spec.n_points < 3 || spec.n_points > 26) throw Error(ErrorCode::InvalidArgument, "n_points must be in [3, 26]");
  if (spec.n_frames < 2) throw Error(ErrorCode::InvalidArgument, "n_frames must be >= 2");
  if (!(spec.noise_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sigma must be >= 0");
  if (!(spec.body_scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "body_scale must be > 0");

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  const double s = spec.body_scale;

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < spec.n_points; ++i) pts.emplace_back(s * unit(rng), s * unit(rng), s * unit(rng));
    if (!body_passes(pts, spec.guard)) continue;

    Scene scene;
    scene.projection = spec.projection;
    std::vector<BodyPoint> bp;
    for (int i = 0; i < spec.n_points; ++i) bp.push_back({std::string(1, static_cast<char>('A' + i)), pts[i]});
    scene.body = RigidBodyModel(std::move(bp));

    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& p : pts) centroid += p;
    centroid /= static_cast<double>(pts.size());

    bool ok = true;
    const Eigen::Vector3d first_dir = random_unit(rng);
    for (int k = 0; k < spec.n_frames && ok; ++k) {
      PoseParams pose;
      double depth_scale = 1.0;
      if (spec.projection == ProjectionKind::Orthogonal) {
        pose.rotation = random_rotation(rng, spec.motion.max_rotation);
        const double t = spec.motion.max_translation;
        pose.translation = Eigen::Vector3d(t * unit(rng), t * unit(rng), t * unit(rng));
      } else {
        const Eigen::Vector3d dir = k == 0 ? first_dir : Eigen::Vector3d(random_rotation(rng, spec.motion.max_rotation) * first_dir);
        const double dist = 3.0 * s + spec.motion.max_translation * frac(rng);
        pose = look_at_camera(centroid + dist * dir, centroid, rng);
        depth_scale = dist;
      }
      FrameObservation obs = spec.projection == ProjectionKind::Orthogonal
                                 ? project_orthogonal(scene.body, pose, k + 1)
                                 : project_perspective(scene.body, pose, k + 1);
      ok = image_passes(obs, spec.guard, depth_scale);
      scene.poses.push_back(pose);
      scene.observations.push_back(std::move(obs));
    }
    if (!ok) continue;
    if (spec.noise_sigma > 0.0) {
      // own stream, so the noiseless scene is the same with or without noise
      std::mt19937_64 noise_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
      std::normal_distribution<double> n(0.0, spec.noise_sigma);
      for (auto& obs : scene.observations) {
        for (auto& p : obs.image) p += Eigen::Vector2d(n(noise_rng), n(noise_rng));
        for (auto& r : obs.rays) r = perturb_ray(r, spec.noise_sigma, noise_rng);
      }
    }
    return scene;
  }
  throw Error(ErrorCode::GuardExhausted,
              "degeneracy guard rejected " + std::to_string(kMaxAttempts) + " samples");
}

}  // namespace rigid
