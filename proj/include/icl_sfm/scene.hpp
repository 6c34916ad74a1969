#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "icl_sfm/geometry.hpp"

namespace icl_sfm {

// ============================================================================
// Scene description
// ============================================================================

// Planar feature set on a stationary object. Positions are stored both in the
// goal frame (known to the estimator) and in the world frame (ground truth).
struct FeatureSet {
  std::vector<Vec3> features_goal;
  std::vector<Vec3> features_world;
  std::array<std::size_t, 3> plane_indices{0, 1, 2};

  [[nodiscard]] std::size_t size() const { return features_goal.size(); }

  // World-frame unit normal of the plane through the three plane_indices points.
  [[nodiscard]] Vec3 normal_world() const {
    return plane_normal(features_world[plane_indices[0]], features_world[plane_indices[1]],
                        features_world[plane_indices[2]]);
  }
};

// Builds a FeatureSet from world positions and the goal pose in the world.
// Requires at least four coplanar points and a non-collinear plane triple.
[[nodiscard]] inline FeatureSet make_feature_set(const std::vector<Vec3>& world, const Vec3& p_w_g,
                                                 const UnitQuaternion& q_w_g,
                                                 std::array<std::size_t, 3> plane_indices = {0, 1, 2}) {
  if (world.size() < 4) {
    throw DegenerateGeometry("at least four features are required");
  }
  for (std::size_t idx : plane_indices) {
    if (idx >= world.size()) {
      throw DegenerateGeometry("plane index out of range");
    }
  }
  if (plane_indices[0] == plane_indices[1] || plane_indices[1] == plane_indices[2] ||
      plane_indices[0] == plane_indices[2]) {
    throw DegenerateGeometry("plane indices must be distinct");
  }
  FeatureSet fs;
  fs.features_world = world;
  fs.plane_indices = plane_indices;
  const Vec3 n = fs.normal_world();
  const Vec3& anchor = world[plane_indices[1]];
  for (const Vec3& p : world) {
    if (std::abs(n.dot(p - anchor)) > 1e-9) {
      throw DegenerateGeometry("features are not coplanar");
    }
  }
  const RotationMatrix r_g_w = rotation_from_quaternion(q_w_g).transpose();
  fs.features_goal.reserve(world.size());
  for (const Vec3& p : world) {
    const Vec3 pg = r_g_w * (p - p_w_g);
    if (!(pg.norm() > 1e-12)) {
      throw DegenerateGeometry("feature coincides with the goal origin");
    }
    fs.features_goal.push_back(pg);
  }
  return fs;
}

struct CameraIntrinsics {
  Mat3 a = Mat3::Identity();

  CameraIntrinsics() = default;
  explicit CameraIntrinsics(const Mat3& m) : a(m) {
    if (!(std::abs(a.determinant()) > 1e-12)) {
      throw DegenerateGeometry("camera intrinsic matrix is not invertible");
    }
  }

  [[nodiscard]] static CameraIntrinsics pinhole(double fx, double fy, double cx, double cy) {
    Mat3 m;
    m << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return CameraIntrinsics(m);
  }
};

struct NoiseModel {
  double pixel_sigma = 0.0;     // px, applied to feature pixel coordinates
  double rotation_sigma = 0.0;  // rad, small-angle perturbation of R_c^g
  std::uint64_t seed = 0;

  [[nodiscard]] bool enabled() const { return pixel_sigma > 0.0 || rotation_sigma > 0.0; }
};

// ============================================================================
// State and measurements
// ============================================================================

// Relative pose of the goal with respect to the camera plus the world-frame
// bookkeeping used for logging. The goal pose in the world is constant.
struct CameraState {
  Vec3 p_c_g = Vec3::Zero();    // goal position in the camera frame [m]
  UnitQuaternion q_c_g;         // orientation of the goal frame w.r.t. the camera
  UnitQuaternion q_w_c;         // orientation of the camera w.r.t. the world
  Vec3 p_w_c = Vec3::Zero();    // camera position in the world [m]
  Vec3 p_w_g = Vec3::Zero();    // goal position in the world [m]
  UnitQuaternion q_w_g;         // goal orientation in the world
  double t = 0.0;

  [[nodiscard]] static CameraState from_world(const Vec3& p_w_c, const UnitQuaternion& q_w_c, const Vec3& p_w_g,
                                              const UnitQuaternion& q_w_g, double t = 0.0) {
    CameraState s;
    s.p_w_c = p_w_c;
    s.q_w_c = q_w_c;
    s.p_w_g = p_w_g;
    s.q_w_g = q_w_g;
    s.q_c_g = q_w_c.conjugate() * q_w_g;
    s.p_c_g = rotation_from_quaternion(q_w_c).transpose() * (p_w_g - p_w_c);
    s.t = t;
    return s;
  }

  [[nodiscard]] RotationMatrix r_c_g() const { return rotation_from_quaternion(q_c_g); }
  [[nodiscard]] RotationMatrix r_w_c() const { return rotation_from_quaternion(q_w_c); }

  // Feature position in the camera frame: p_c^s = p_c^g + R_c^g p_g^s.
  [[nodiscard]] Vec3 feature_in_camera(const Vec3& p_g_s) const { return p_c_g + r_c_g() * p_g_s; }
};

struct Measurement {
  double t = 0.0;
  std::vector<Vec3> u_c_s;  // bearings to the features, camera frame
  Vec3 u_c_g = Vec3::UnitZ();
  RotationMatrix r_c_g;
  std::vector<Vec3> u_g_s;  // constant goal-frame feature directions
};

// ============================================================================
// Operations
// ============================================================================

// Forward component positive and angle from the optical axis <= half_angle
// (boundary inclusive).
[[nodiscard]] inline bool fov_predicate(const Vec3& p_c, double half_angle) {
  if (!(p_c.z() > 0.0)) {
    return false;
  }
  const double angle = std::atan2(p_c.head<2>().norm(), p_c.z());
  return angle <= half_angle + 1e-12;
}

// Advances the relative pose under a camera-frame translational velocity v_c
// (held constant over the step) and the known angular velocity omega of the
// goal frame relative to the camera. The camera position is propagated in the
// world with RK4 jointly with q_c^g; p_c^g is then re-expressed from the
// constant goal pose, so camera rotation during the step is accounted for and
// the relative and world states stay consistent by construction.
[[nodiscard]] inline CameraState step_dynamics(const CameraState& state, const Vec3& v_c, const Vec3& omega,
                                               double dt) {
  CameraState next = state;
  next.t = state.t + dt;
  if (v_c.isZero(0.0) && omega.isZero(0.0)) {
    return next;
  }

  struct Deriv {
    Vec3 p;
    Vec4 q;
  };
  const Mat3 r_w_g = rotation_from_quaternion(state.q_w_g).matrix();
  const auto rate = [&](const Vec4& qcg) {
    // R_w^c = R_w^g (R_c^g)^T; the stage quaternion is normalized only here.
    const Mat3 r_w_c = r_w_g * rotation_from_quaternion(UnitQuaternion(qcg)).matrix().transpose();
    Deriv d;
    d.p = r_w_c * v_c;
    d.q(0) = -qcg.tail<3>().dot(omega);
    d.q.tail<3>() = qcg(0) * omega + qcg.tail<3>().cross(omega);
    d.q *= 0.5;
    return d;
  };

  const Vec4 q0 = state.q_c_g.coeffs();
  const Deriv k1 = rate(q0);
  const Deriv k2 = rate(q0 + 0.5 * dt * k1.q);
  const Deriv k3 = rate(q0 + 0.5 * dt * k2.q);
  const Deriv k4 = rate(q0 + dt * k3.q);
  next.p_w_c = state.p_w_c + dt / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
  next.q_c_g = UnitQuaternion(Vec4(q0 + dt / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q)));
  next.q_w_c = state.q_w_g * next.q_c_g.conjugate();
  next.p_c_g = next.r_w_c().transpose() * (state.p_w_g - next.p_w_c);
  return next;
}

namespace detail {

// Deterministic per-measurement generator: the stream depends only on the
// seed and the timestamp, so repeated calls reproduce the same noise.
[[nodiscard]] inline std::mt19937_64 measurement_rng(std::uint64_t seed, double t) {
  const auto tbits = std::bit_cast<std::uint64_t>(t);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tbits), static_cast<std::uint32_t>(tbits >> 32)};
  return std::mt19937_64(seq);
}

// Rotates a unit vector by a random small angle about a random perpendicular axis.
[[nodiscard]] inline Vec3 perturb_direction(const Vec3& u, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const Vec3 g(n01(rng), n01(rng), n01(rng));
  const Vec3 tangent = g - u * u.dot(g);
  return rotation_from_quaternion(UnitQuaternion::from_axis_angle(sigma * u.cross(tangent))) * u;
}

}  // namespace detail

// Synthetic camera measurement. Feature bearings go through the full pixel
// round trip (project with A, optional Gaussian pixel noise, back-project with
// A^-1 and normalize). R_c^g and u_c^g come from ground truth, optionally
// perturbed by small rotations (u_c^g with the pixel-equivalent angle
// pixel_sigma / fx). When the camera sits on the goal u_c^g is undefined and
// the optical axis is reported instead.
[[nodiscard]] inline Measurement synthesize_measurement(const CameraState& state, const FeatureSet& fs,
                                                        const CameraIntrinsics& k, const NoiseModel& noise,
                                                        double fov_half_angle = M_PI / 3.0) {
  Measurement m;
  m.t = state.t;
  m.u_c_s.reserve(fs.size());
  m.u_g_s.reserve(fs.size());

  const RotationMatrix r_c_g = state.r_c_g();
  std::vector<Vec3> p_c_s;
  p_c_s.reserve(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const Vec3 p = state.p_c_g + r_c_g * fs.features_goal[i];
    if (!fov_predicate(p, fov_half_angle)) {
      throw FeatureLost("feature " + std::to_string(i) + " left the field of view at t=" + std::to_string(state.t));
    }
    p_c_s.push_back(p);
    m.u_g_s.push_back(fs.features_goal[i].normalized());
  }

  std::mt19937_64 rng = detail::measurement_rng(noise.seed, state.t);
  std::normal_distribution<double> n01(0.0, 1.0);
  const Mat3 a_inv = k.a.inverse();
  for (const Vec3& p : p_c_s) {
    Vec3 pixel = k.a * (p / p.z());
    if (noise.pixel_sigma > 0.0) {
      pixel.x() += noise.pixel_sigma * n01(rng);
      pixel.y() += noise.pixel_sigma * n01(rng);
    }
    m.u_c_s.push_back((a_inv * pixel).normalized());
  }

  const double d_c_g = state.p_c_g.norm();
  m.u_c_g = d_c_g > 1e-12 ? Vec3(state.p_c_g / d_c_g) : Vec3::UnitZ();
  m.r_c_g = r_c_g;
  if (noise.pixel_sigma > 0.0) {
    m.u_c_g = detail::perturb_direction(m.u_c_g, noise.pixel_sigma / k.a(0, 0), rng);
  }
  if (noise.rotation_sigma > 0.0) {
    const Vec3 dtheta(noise.rotation_sigma * n01(rng), noise.rotation_sigma * n01(rng),
                      noise.rotation_sigma * n01(rng));
    m.r_c_g = rotation_from_quaternion(UnitQuaternion::from_axis_angle(dtheta)) * r_c_g;
  }
  return m;
}

struct TrueDistances {
  std::vector<double> d_c_s;
  double d_c_g = 0.0;
  std::vector<double> d_g_s;
};

[[nodiscard]] inline TrueDistances true_distances(const CameraState& state, const FeatureSet& fs) {
  TrueDistances out;
  out.d_c_g = state.p_c_g.norm();
  const RotationMatrix r = state.r_c_g();
  for (const Vec3& pg : fs.features_goal) {
    out.d_c_s.push_back((state.p_c_g + r * pg).norm());
    out.d_g_s.push_back(pg.norm());
  }
  return out;
}

}  // namespace icl_sfm
