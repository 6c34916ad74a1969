#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "icl_sfm/geometry.hpp"
#include "icl_sfm/scene.hpp"

namespace icl_sfm {

// ============================================================================
// Distance regressor
// ============================================================================

struct RegressorSample {
  double t = 0.0;
  Vec2 y = Vec2::Zero();                       // (d_c^s, d_c^g) = y * d_g^s
  Eigen::Matrix<double, 3, 2> h = Eigen::Matrix<double, 3, 2>::Zero();  // [u_c^s, -u_c^g]
};

// Y = (H^T H)^-1 H^T R_c^g u_g^s with H = [u_c^s, -u_c^g]. Throws
// DegenerateBearing when the smallest singular value of H drops below 1e-8.
[[nodiscard]] inline RegressorSample regressor(const Measurement& m, std::size_t i) {
  RegressorSample out;
  out.t = m.t;
  out.h.col(0) = m.u_c_s.at(i);
  out.h.col(1) = -m.u_c_g;
  const Mat2 hth = out.h.transpose() * out.h;
  // Eigenvalues of H^T H are 1 +/- |u_s . u_g| for unit columns.
  const double c = std::abs(hth(0, 1));
  const double sigma_min = std::sqrt(std::max(0.0, 0.5 * (hth(0, 0) + hth(1, 1)) - std::hypot(0.5 * (hth(0, 0) - hth(1, 1)), c)));
  if (!(sigma_min > 1e-8)) {
    throw DegenerateBearing("bearing to feature " + std::to_string(i) + " is parallel to the goal bearing at t=" +
                            std::to_string(m.t));
  }
  out.y = hth.ldlt().solve(out.h.transpose() * (m.r_c_g * m.u_g_s.at(i)));
  return out;
}

// Integral of -u^T v over one sampling interval of length dt, given the unit
// bearings at both ends and a velocity held constant in a non-rotating camera
// frame. Under those conditions the bearing sweeps a great circle and the
// integral equals the chord formula -dt v^T (u_a + u_b) * 2 / |u_a + u_b|^2,
// which is exact (the trapezoid rule is recovered to first order).
[[nodiscard]] inline double bearing_increment(const Vec3& u_a, const Vec3& u_b, const Vec3& v, double dt) {
  const Vec3 sum = u_a + u_b;
  const double s2 = sum.squaredNorm();
  if (s2 < 1e-6) {
    return -0.5 * dt * v.dot(sum);
  }
  return -2.0 * dt * v.dot(sum) / s2;
}

// ============================================================================
// Integral window
// ============================================================================

struct WindowSample {
  double t = 0.0;
  Vec2 y = Vec2::Zero();
  Vec2 integral = Vec2::Zero();  // running integral of eta = -[u_s^T; u_g^T] v_c since the first sample
};

// Time-ordered samples spanning at least T seconds back from the newest one.
class IntegralWindow {
 public:
  explicit IntegralWindow(double window_length = 0.5) : length_(window_length) {}

  [[nodiscard]] double length() const { return length_; }
  [[nodiscard]] const std::deque<WindowSample>& buffer() const { return buffer_; }
  [[nodiscard]] std::optional<double> origin() const { return origin_; }

  // Appends a sample; timestamps must be strictly increasing. Samples older
  // than needed to interpolate at t - T are discarded.
  void push(const WindowSample& s) {
    if (!buffer_.empty() && !(s.t > buffer_.back().t)) {
      throw InsufficientBuffer("window timestamps must be strictly increasing");
    }
    if (!origin_) {
      origin_ = s.t;
    }
    buffer_.push_back(s);
    const double keep_from = s.t - length_ - tolerance(s.t);
    while (buffer_.size() > 2 && buffer_[1].t <= keep_from) {
      buffer_.pop_front();
    }
  }

  [[nodiscard]] static double tolerance(double t) { return 1e-9 * std::max(1.0, std::abs(t)); }

  // Linear interpolation of the stored signals at time t.
  [[nodiscard]] WindowSample sample_at(double t) const {
    const double tol = tolerance(t);
    if (buffer_.empty() || buffer_.front().t > t + tol || buffer_.back().t < t - tol) {
      throw InsufficientBuffer("window does not cover t=" + std::to_string(t));
    }
    if (std::abs(buffer_.back().t - t) <= tol) {
      return buffer_.back();
    }
    std::size_t hi = 1;
    while (hi < buffer_.size() && buffer_[hi].t < t - tol) {
      ++hi;
    }
    const WindowSample& b = buffer_[hi];
    if (std::abs(b.t - t) <= tol) {
      return b;
    }
    const WindowSample& a = buffer_[hi - 1];
    if (std::abs(a.t - t) <= tol) {
      return a;
    }
    const double w = (t - a.t) / (b.t - a.t);
    WindowSample out;
    out.t = t;
    out.y = (1.0 - w) * a.y + w * b.y;
    out.integral = (1.0 - w) * a.integral + w * b.integral;
    return out;
  }

 private:
  double length_;
  std::deque<WindowSample> buffer_;
  std::optional<double> origin_;
};

struct WindowPair {
  Vec2 script_y = Vec2::Zero();
  Vec2 script_u = Vec2::Zero();
};

// (Y(t) - Y(t-T), integral of eta over [t-T, t]) for t > T, zero otherwise.
// Time is measured from the window's first sample.
[[nodiscard]] inline WindowPair window_pair(const IntegralWindow& w, double t) {
  const double t0 = w.origin().value_or(0.0);
  if (t - t0 <= w.length() + IntegralWindow::tolerance(t)) {
    return {};
  }
  const WindowSample now = w.sample_at(t);
  const WindowSample past = w.sample_at(t - w.length());
  return {now.y - past.y, now.integral - past.integral};
}

// ============================================================================
// History stack
// ============================================================================

struct HistoryStack {
  double sigma_y = 0.0;           // sum of scriptY^T scriptY
  double sigma_u = 0.0;           // sum of scriptY^T scriptU
  Mat2 gram2 = Mat2::Zero();      // sum of scriptY scriptY^T
  int count = 0;
  int capacity = 50;              // N
  double lambda_tau = 1e-3;
  double admission_interval = 0.25;
  double info_floor = 1e-8;
  double next_admission = -std::numeric_limits<double>::infinity();
  std::optional<double> tau_detected;

  [[nodiscard]] bool excited() const { return tau_detected.has_value(); }
};

// Admits (scriptY, scriptU) when the stack is not full, the admission interval
// has elapsed and scriptY^T scriptY exceeds the information floor. Records tau
// the first time sigma_y exceeds lambda_tau.
[[nodiscard]] inline HistoryStack stack_update(const HistoryStack& s, const Vec2& script_y, const Vec2& script_u,
                                               double t) {
  HistoryStack out = s;
  const double info = script_y.squaredNorm();
  if (out.count >= out.capacity || !(info > out.info_floor) ||
      t < out.next_admission - IntegralWindow::tolerance(t)) {
    return out;
  }
  out.sigma_y += info;
  out.sigma_u += script_y.dot(script_u);
  out.gram2 += script_y * script_y.transpose();
  out.count += 1;
  out.next_admission = t + out.admission_interval;
  if (!out.tau_detected && out.sigma_y > out.lambda_tau) {
    out.tau_detected = t;
  }
  return out;
}

// sigma_y^-1 sigma_u; only valid once the excitation threshold was crossed.
[[nodiscard]] inline double batch_solve(const HistoryStack& s) {
  if (!s.excited() || !(s.sigma_y > s.lambda_tau)) {
    throw NotYetExcited("history stack has not reached the excitation threshold");
  }
  return s.sigma_u / s.sigma_y;
}

// ============================================================================
// ICL observer
// ============================================================================

struct ObserverGains {
  double kappa1 = 5.0;
  double kappa2 = 5.0;
  double kappa3 = 5.0;

  [[nodiscard]] double min() const { return std::min({kappa1, kappa2, kappa3}); }
};

// How the single camera-to-goal estimate is driven from per-feature data.
enum class GoalFusion { Anchor, Average };

struct ObserverConfig {
  double window_length = 0.5;  // T
  int stack_size = 50;         // N
  double lambda_tau = 1e-3;
  double admission_interval = 0.25;
  double info_floor = 1e-8;
  GoalFusion fusion = GoalFusion::Anchor;
  std::size_t anchor = 0;
};

struct InitialEstimates {
  std::vector<double> d_c_s;
  double d_c_g = 0.0;
  std::vector<double> d_g_s;

  [[nodiscard]] static InitialEstimates zeros(std::size_t n) { return {std::vector<double>(n, 0.0), 0.0, std::vector<double>(n, 0.0)}; }
};

struct FeatureTrack {
  double d_hat_c_s = 0.0;
  double d_hat_g_s = 0.0;
  HistoryStack stack;
  IntegralWindow window;
  Vec3 last_u_c_s = Vec3::UnitZ();
  Vec2 y = Vec2::Zero();
  WindowPair pair;
};

struct ObserverState {
  ObserverConfig config;
  std::vector<FeatureTrack> features;
  double d_hat_c_g = 0.0;
  Vec3 last_u_c_g = Vec3::UnitZ();
  double t = 0.0;

  [[nodiscard]] std::size_t size() const { return features.size(); }

  [[nodiscard]] bool goal_excited() const {
    if (config.fusion == GoalFusion::Anchor) {
      return features.at(config.anchor).stack.excited();
    }
    for (const FeatureTrack& f : features) {
      if (f.stack.excited()) {
        return true;
      }
    }
    return false;
  }

  [[nodiscard]] bool all_excited() const {
    for (const FeatureTrack& f : features) {
      if (!f.stack.excited()) {
        return false;
      }
    }
    return true;
  }
};

namespace detail {

// One RK4 step of x' = kappa (target - x) with the target held constant.
[[nodiscard]] inline double relax_rk4(double x, double target, double kappa, double dt) {
  const double a = kappa * dt;
  const double factor = 1.0 - a + a * a / 2.0 - a * a * a / 6.0 + a * a * a * a / 24.0;
  return target + (x - target) * factor;
}

}  // namespace detail

[[nodiscard]] inline ObserverState observer_init(const ObserverConfig& cfg, const Measurement& m,
                                                 const InitialEstimates& init) {
  const std::size_t n = m.u_c_s.size();
  if (init.d_c_s.size() != n || init.d_g_s.size() != n) {
    throw std::invalid_argument("initial estimates do not match the number of features");
  }
  if (cfg.anchor >= n) {
    throw std::invalid_argument("anchor feature index out of range");
  }
  ObserverState st;
  st.config = cfg;
  st.d_hat_c_g = init.d_c_g;
  st.last_u_c_g = m.u_c_g;
  st.t = m.t;
  st.features.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    FeatureTrack& f = st.features[i];
    f.d_hat_c_s = init.d_c_s[i];
    f.d_hat_g_s = init.d_g_s[i];
    f.stack.capacity = cfg.stack_size;
    f.stack.lambda_tau = cfg.lambda_tau;
    f.stack.admission_interval = cfg.admission_interval;
    f.stack.info_floor = cfg.info_floor;
    f.window = IntegralWindow(cfg.window_length);
    f.last_u_c_s = m.u_c_s[i];
    f.y = regressor(m, i).y;
    f.window.push({m.t, f.y, Vec2::Zero()});
  }
  return st;
}

// Advances the observer across the interval that ends at the measurement
// time m.t, during which the camera moved with velocity v_c for dt seconds.
//
// Per feature: the eta integral over the interval is taken from the bearing
// pair at both ends, the window and history stack are updated with the new
// regressor sample, and the estimates follow
//   d_c^s:  eta_1            (+ kappa1 (nu_1 - d_c^s) once excited)
//   d_g^s:  0                (kappa3 (sigma_u / sigma_y - d_g^s) once excited)
// with nu = Y sigma_u / sigma_y. d_c^g integrates eta_2 and is corrected from
// the anchor feature, or the mean of nu_2 over excited features.
[[nodiscard]] inline ObserverState observer_step(const ObserverState& st, const Measurement& m, const Vec3& v_c,
                                                 const ObserverGains& g, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("observer_step requires dt > 0");
  }
  if (m.u_c_s.size() != st.size()) {
    throw std::invalid_argument("measurement feature count changed");
  }
  ObserverState next = st;
  next.t = m.t;

  const double eta_goal = bearing_increment(st.last_u_c_g, m.u_c_g, v_c, dt);
  double nu_goal_sum = 0.0;
  int nu_goal_count = 0;

  for (std::size_t i = 0; i < st.size(); ++i) {
    const FeatureTrack& prev = st.features[i];
    FeatureTrack& f = next.features[i];
    const bool was_excited = prev.stack.excited();

    const double eta_feature = bearing_increment(prev.last_u_c_s, m.u_c_s[i], v_c, dt);
    f.y = regressor(m, i).y;
    const Vec2 integral = prev.window.buffer().back().integral + Vec2(eta_feature, eta_goal);
    f.window.push({m.t, f.y, integral});
    f.pair = window_pair(f.window, m.t);
    f.stack = stack_update(prev.stack, f.pair.script_y, f.pair.script_u, m.t);
    f.last_u_c_s = m.u_c_s[i];

    f.d_hat_c_s = prev.d_hat_c_s + eta_feature;
    if (was_excited) {
      const double theta = batch_solve(f.stack);
      const Vec2 nu = f.y * theta;
      f.d_hat_c_s = detail::relax_rk4(f.d_hat_c_s, nu(0), g.kappa1, dt);
      f.d_hat_g_s = detail::relax_rk4(prev.d_hat_g_s, theta, g.kappa3, dt);
      const bool contributes =
          st.config.fusion == GoalFusion::Average || i == st.config.anchor;
      if (contributes) {
        nu_goal_sum += nu(1);
        ++nu_goal_count;
      }
    }
  }

  next.d_hat_c_g = st.d_hat_c_g + eta_goal;
  if (nu_goal_count > 0) {
    next.d_hat_c_g = detail::relax_rk4(next.d_hat_c_g, nu_goal_sum / nu_goal_count, g.kappa2, dt);
  }
  next.last_u_c_g = m.u_c_g;
  return next;
}

}  // namespace icl_sfm
