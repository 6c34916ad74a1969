#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "icl_sfm/geometry.hpp"
#include "icl_sfm/observer.hpp"
#include "icl_sfm/scene.hpp"

namespace icl_sfm {

// ============================================================================
// Optimal velocity gains
// ============================================================================
// Cost: p^T Q p + v^T R v + gamma <v, n>^2 with p_dot = v. The effective input
// weight is R_bar = R + gamma n n^T; the value function is J*(p) = p^T S p with
// S solving -S R_bar^-1 S + Q = 0, and the camera command is v_c = K p_hat with
// K = R_bar^-1 S.
struct PlannerGains {
  SymPosDef q_c = SymPosDef::identity();
  SymPosDef r_c = SymPosDef::identity();
  double gamma_c = 0.0;
  Vec3 n_s = Vec3::UnitZ();
  Mat3 n_mat = Mat3::Zero();
  SymPosDef r_bar = SymPosDef::identity();
  SymPosDef s_c = SymPosDef::identity();
  Mat3 k_s = Mat3::Identity();
};

struct PlannerDiagnostics {
  double j_star = 0.0;
  double gamma_s_min = 0.0;
  double gamma_s_max = 0.0;
  double cost_accumulated = 0.0;
};

// S = R_bar^1/2 (R_bar^-1/2 Q R_bar^-1/2)^1/2 R_bar^1/2.
[[nodiscard]] inline PlannerGains build_gains(const SymPosDef& q_c, const SymPosDef& r_c, double gamma_c,
                                              const Vec3& n_s) {
  if (!(gamma_c >= 0.0) || !std::isfinite(gamma_c)) {
    throw std::invalid_argument("gamma_c must be finite and non-negative");
  }
  if (std::abs(n_s.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("plane normal must be a unit vector");
  }
  PlannerGains g;
  g.q_c = q_c;
  g.r_c = r_c;
  g.gamma_c = gamma_c;
  g.n_s = n_s;
  g.n_mat = n_s * n_s.transpose();
  g.r_bar = SymPosDef(r_c.matrix() + gamma_c * g.n_mat);

  const SymPosDef r_bar_half = spd_sqrt(g.r_bar);
  const Mat3 r_bar_neg_half = spd_inverse(r_bar_half).matrix();
  const SymPosDef inner(Mat3(0.5 * (r_bar_neg_half * q_c.matrix() * r_bar_neg_half +
                                    (r_bar_neg_half * q_c.matrix() * r_bar_neg_half).transpose())));
  const Mat3 s = r_bar_half.matrix() * spd_sqrt(inner).matrix() * r_bar_half.matrix();
  g.s_c = SymPosDef(Mat3(0.5 * (s + s.transpose())));
  g.k_s = g.r_bar.matrix().llt().solve(g.s_c.matrix());
  return g;
}

// Frobenius norm of -S R_bar^-1 S + Q.
[[nodiscard]] inline double riccati_residual(const PlannerGains& g) {
  const Mat3 s = g.s_c.matrix();
  return (-s * g.r_bar.matrix().llt().solve(s) + g.q_c.matrix()).norm();
}

// v_c = -v_hat_c^g = K_s p_hat_c^g.
[[nodiscard]] inline Vec3 control_velocity(const PlannerGains& g, const Vec3& p_hat) { return g.k_s * p_hat; }

// Camera-frame command re-expressed in the world: R_w^c v_c.
[[nodiscard]] inline Vec3 world_velocity(const Vec3& v_c, const RotationMatrix& r_w_c) { return r_w_c * v_c; }

// Alternative reading K_s R_w^c p_hat, kept for logging side by side.
[[nodiscard]] inline Vec3 world_velocity_literal(const PlannerGains& g, const RotationMatrix& r_w_c,
                                                 const Vec3& p_hat) {
  return g.k_s * (r_w_c * p_hat);
}

// How per-feature goal estimates are combined.
enum class GoalEstimateMode { Mean, Anchor };

// p_hat_c^g(i) = d_hat_c^s(i) u_c^s(i) - R_c^g p_g^s(i), fused across features.
[[nodiscard]] inline Vec3 goal_estimate(const ObserverState& obs, const Measurement& m, const FeatureSet& fs,
                                        GoalEstimateMode mode = GoalEstimateMode::Mean, std::size_t anchor = 0) {
  const auto single = [&](std::size_t i) -> Vec3 {
    return obs.features.at(i).d_hat_c_s * m.u_c_s.at(i) - m.r_c_g * fs.features_goal.at(i);
  };
  if (mode == GoalEstimateMode::Anchor) {
    return single(anchor);
  }
  Vec3 sum = Vec3::Zero();
  for (std::size_t i = 0; i < fs.size(); ++i) {
    sum += single(i);
  }
  return sum / static_cast<double>(fs.size());
}

// p^T Q p + v^T R v + gamma <v, n>^2.
[[nodiscard]] inline double running_cost(const PlannerGains& g, const Vec3& p, const Vec3& v) {
  const double ortho = v.dot(g.n_s);
  return p.dot(g.q_c.matrix() * p) + v.dot(g.r_c.matrix() * v) + g.gamma_c * ortho * ortho;
}

// J*(p) and the spectral bounds of Gamma_s = S R^-1 S.
[[nodiscard]] inline PlannerDiagnostics diagnostics(const PlannerGains& g, const Vec3& p) {
  PlannerDiagnostics d;
  d.j_star = p.dot(g.s_c.matrix() * p);
  const Mat3 s = g.s_c.matrix();
  Mat3 gamma_s = s * g.r_c.matrix().llt().solve(s);
  gamma_s = 0.5 * (gamma_s + gamma_s.transpose());
  const Eigen::SelfAdjointEigenSolver<Mat3> es(gamma_s, Eigen::EigenvaluesOnly);
  d.gamma_s_min = es.eigenvalues()(0);
  d.gamma_s_max = es.eigenvalues()(2);
  return d;
}

// sqrt(2 lambda_max / lambda_min) |d_tilde_c^g|: the radius beyond which J*
// must decrease.
[[nodiscard]] inline double iss_threshold(const PlannerDiagnostics& d, double d_tilde_c_g) {
  return std::sqrt(2.0 * d.gamma_s_max / d.gamma_s_min) * std::abs(d_tilde_c_g);
}

// Optional orientation regulator w = -k q_v on the goal-relative quaternion.
[[nodiscard]] inline Vec3 orientation_feedback(const UnitQuaternion& q_c_g, double k_omega) {
  const double sign = q_c_g.w() < 0.0 ? -1.0 : 1.0;
  return -k_omega * sign * q_c_g.vec();
}

}  // namespace icl_sfm
