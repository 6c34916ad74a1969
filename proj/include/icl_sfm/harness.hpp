#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "icl_sfm/config.hpp"
#include "icl_sfm/geometry.hpp"
#include "icl_sfm/observer.hpp"
#include "icl_sfm/planner.hpp"
#include "icl_sfm/scene.hpp"

namespace icl_sfm {

// One logged time step. Quantities are sampled at t before the command v_c is
// applied for the following dt.
struct RunRow {
  double t = 0.0;
  std::vector<double> d_c_s_true, d_c_s_hat;
  double d_c_g_true = 0.0, d_c_g_hat = 0.0;
  std::vector<double> d_g_s_true, d_g_s_hat;

  Vec3 p_c_g = Vec3::Zero();
  Vec3 p_hat_c_g = Vec3::Zero();
  Vec3 v_c = Vec3::Zero();
  Vec3 p_c_g_world = Vec3::Zero();
  Vec3 p_hat_c_g_world = Vec3::Zero();
  Vec3 v_world = Vec3::Zero();
  Vec3 v_world_literal = Vec3::Zero();

  std::vector<double> sigma_y;
  std::vector<int> tau_flag;
  std::vector<double> cond;
  std::vector<double> batch;  // sigma_u / sigma_y once excited, NaN before
  double lyapunov = 0.0;
  double j_star = 0.0;
  double cost = 0.0;
  double iss_threshold = 0.0;

  // Per-feature observer internals kept for identity checks.
  std::vector<Vec2> y;
  std::vector<Vec2> script_y;
  std::vector<Vec2> script_u;
  double q_c_g_norm = 1.0;
  double q_w_c_norm = 1.0;

  [[nodiscard]] double d_c_s_tilde(std::size_t i) const { return d_c_s_true[i] - d_c_s_hat[i]; }
  [[nodiscard]] double d_c_g_tilde() const { return d_c_g_true - d_c_g_hat; }
  [[nodiscard]] double d_g_s_tilde(std::size_t i) const { return d_g_s_true[i] - d_g_s_hat[i]; }

  // |theta_tilde| over all features, d_tilde_c^g counted once.
  [[nodiscard]] double error_norm() const { return std::sqrt(2.0 * lyapunov); }
};

enum class RunStatus { Ok, FeatureLost, DegenerateBearing };

struct RunLog {
  std::size_t n_features = 0;
  double dt = 0.0;
  double gamma_c = 0.0;
  std::vector<RunRow> rows;
  CameraState final_state;
  RunStatus status = RunStatus::Ok;
  std::string message;
  std::vector<std::optional<double>> tau;  // per-feature excitation time
  PlannerGains gains;

  [[nodiscard]] bool ok() const { return status == RunStatus::Ok; }

  // Time from which every feature's stack is excited.
  [[nodiscard]] std::optional<double> tau_all() const {
    double latest = -std::numeric_limits<double>::infinity();
    for (const auto& t : tau) {
      if (!t) {
        return std::nullopt;
      }
      latest = std::max(latest, *t);
    }
    return tau.empty() ? std::nullopt : std::optional<double>(latest);
  }

  [[nodiscard]] double final_position_error() const { return final_state.p_c_g.norm(); }
};

namespace detail {

[[nodiscard]] inline InitialEstimates initial_estimates(const ScenarioConfig& cfg, const CameraState& s0,
                                                        const FeatureSet& fs) {
  switch (cfg.init_mode) {
    case InitMode::Truth: {
      const TrueDistances d = true_distances(s0, fs);
      return {d.d_c_s, d.d_c_g, d.d_g_s};
    }
    case InitMode::Values:
      return cfg.init_values;
    case InitMode::Zero:
      break;
  }
  return InitialEstimates::zeros(fs.size());
}

[[nodiscard]] inline PlannerGains gains_for(const ScenarioConfig& cfg, const Vec3& n_world, const RotationMatrix& r_w_c) {
  // The orthogonality penalty acts on the camera-frame velocity, so the plane
  // normal is expressed in the camera frame.
  const Vec3 n_cam = r_w_c.transpose() * n_world;
  return build_gains(SymPosDef(cfg.q_c), SymPosDef(cfg.r_c), cfg.gamma_c, n_cam.normalized());
}

}  // namespace detail

// Fixed-step closed loop: measure -> observe -> estimate goal -> plan -> move.
// FeatureLost and DegenerateBearing end the run early; the partial log is
// returned with its status set.
[[nodiscard]] inline RunLog run(const ScenarioConfig& cfg) {
  validate(cfg);
  const FeatureSet fs = cfg.feature_set();
  const CameraIntrinsics intrinsics(cfg.intrinsics);
  const Vec3 n_world = fs.normal_world();
  const std::size_t n = fs.size();
  NoiseModel noise = cfg.noise;
  noise.seed = cfg.seed;

  CameraState state = cfg.initial_state();
  PlannerGains gains = detail::gains_for(cfg, n_world, state.r_w_c());

  RunLog log;
  log.n_features = n;
  log.dt = cfg.dt;
  log.gamma_c = cfg.gamma_c;
  log.gains = gains;
  const std::size_t steps = cfg.step_count();
  log.rows.reserve(steps);

  ObserverState obs;
  Vec3 v_prev = Vec3::Zero();

  for (std::size_t k = 0; k < steps; ++k) {
    state.t = static_cast<double>(k) * cfg.dt;
    Measurement m;
    try {
      m = synthesize_measurement(state, fs, intrinsics, noise, cfg.fov_half_angle);
      if (k == 0) {
        obs = observer_init(cfg.observer, m, detail::initial_estimates(cfg, state, fs));
      } else {
        obs = observer_step(obs, m, v_prev, cfg.gains, cfg.dt);
      }
    } catch (const FeatureLost& e) {
      log.status = RunStatus::FeatureLost;
      log.message = e.what();
      break;
    } catch (const DegenerateBearing& e) {
      log.status = RunStatus::DegenerateBearing;
      log.message = e.what();
      break;
    }

    if (cfg.orientation == OrientationMode::Feedback) {
      gains = detail::gains_for(cfg, n_world, state.r_w_c());
    }
    const Vec3 p_hat = goal_estimate(obs, m, fs, cfg.goal_mode, cfg.goal_anchor);
    const Vec3 v_c = control_velocity(gains, p_hat);
    const Vec3 omega =
        cfg.orientation == OrientationMode::Feedback ? orientation_feedback(state.q_c_g, cfg.k_omega) : Vec3::Zero();

    const TrueDistances truth = true_distances(state, fs);
    const RotationMatrix r_w_c = state.r_w_c();
    RunRow row;
    row.t = state.t;
    row.d_c_s_true = truth.d_c_s;
    row.d_c_g_true = truth.d_c_g;
    row.d_g_s_true = truth.d_g_s;
    row.d_c_g_hat = obs.d_hat_c_g;
    row.p_c_g = state.p_c_g;
    row.p_hat_c_g = p_hat;
    row.v_c = v_c;
    row.p_c_g_world = r_w_c * state.p_c_g;
    row.p_hat_c_g_world = r_w_c * p_hat;
    row.v_world = world_velocity(v_c, r_w_c);
    row.v_world_literal = world_velocity_literal(gains, r_w_c, p_hat);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const FeatureTrack& f = obs.features[i];
      row.d_c_s_hat.push_back(f.d_hat_c_s);
      row.d_g_s_hat.push_back(f.d_hat_g_s);
      row.sigma_y.push_back(f.stack.sigma_y);
      row.tau_flag.push_back(f.stack.excited() && state.t >= *f.stack.tau_detected ? 1 : 0);
      row.cond.push_back(condition_number(f.stack.gram2));
      row.batch.push_back(f.stack.excited() ? batch_solve(f.stack) : std::numeric_limits<double>::quiet_NaN());
      row.y.push_back(f.y);
      row.script_y.push_back(f.pair.script_y);
      row.script_u.push_back(f.pair.script_u);
      const double a = row.d_c_s_tilde(i);
      const double b = row.d_g_s_tilde(i);
      sq += a * a + b * b;
    }
    sq += row.d_c_g_tilde() * row.d_c_g_tilde();
    row.lyapunov = 0.5 * sq;
    const PlannerDiagnostics diag = diagnostics(gains, state.p_c_g);
    row.j_star = diag.j_star;
    row.iss_threshold = iss_threshold(diag, row.d_c_g_tilde());
    row.cost = running_cost(gains, state.p_c_g, -v_c);
    row.q_c_g_norm = state.q_c_g.norm();
    row.q_w_c_norm = state.q_w_c.norm();
    log.rows.push_back(std::move(row));

    state = step_dynamics(state, v_c, omega, cfg.dt);
    state.t = static_cast<double>(k + 1) * cfg.dt;
    v_prev = v_c;
  }

  log.final_state = state;
  log.tau.resize(n);
  for (std::size_t i = 0; i < n && i < obs.features.size(); ++i) {
    log.tau[i] = obs.features[i].stack.tau_detected;
  }
  return log;
}

// Mean of cond(sum scriptY scriptY^T) over post-tau rows and all features.
// Rows where the Gram matrix is still singular (+inf) are skipped; the count
// of contributing samples is returned alongside.
struct ConditioningAverage {
  double mean = std::numeric_limits<double>::quiet_NaN();
  std::size_t samples = 0;
  std::size_t singular = 0;
};

[[nodiscard]] inline ConditioningAverage average_condition(const RunLog& log) {
  ConditioningAverage out;
  double sum = 0.0;
  for (const RunRow& row : log.rows) {
    for (std::size_t i = 0; i < row.cond.size(); ++i) {
      if (row.tau_flag[i] == 0) {
        continue;
      }
      if (!std::isfinite(row.cond[i])) {
        ++out.singular;
        continue;
      }
      sum += row.cond[i];
      ++out.samples;
    }
  }
  if (out.samples > 0) {
    out.mean = sum / static_cast<double>(out.samples);
  }
  return out;
}

[[nodiscard]] inline double total_cost(const RunLog& log) {
  double sum = 0.0;
  for (const RunRow& row : log.rows) {
    sum += row.cost * log.dt;
  }
  return sum;
}

struct SweepRow {
  double gamma = 0.0;
  double avg_cond = std::numeric_limits<double>::quiet_NaN();
  double final_pos_err = std::numeric_limits<double>::quiet_NaN();
  double total_cost = std::numeric_limits<double>::quiet_NaN();
  std::size_t cond_samples = 0;
  bool ok = false;
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  [[nodiscard]] bool all_ok() const {
    return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.ok; });
  }
};

[[nodiscard]] inline SweepRow summarize(double gamma, const RunLog& log) {
  SweepRow row;
  row.gamma = gamma;
  row.ok = log.ok();
  row.error = log.message;
  const ConditioningAverage avg = average_condition(log);
  row.avg_cond = avg.mean;
  row.cond_samples = avg.samples;
  row.total_cost = total_cost(log);
  row.final_pos_err = log.final_position_error();
  if (!row.ok) {
    row.final_pos_err = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

// One run per gamma with the same seed. Runs are independent and execute on
// up to `workers` threads; a failed run is recorded without stopping the rest.
[[nodiscard]] inline SweepResult sweep_gamma(const ScenarioConfig& cfg, const std::vector<double>& gammas,
                                             unsigned workers = std::max(1u, std::thread::hardware_concurrency())) {
  if (gammas.empty()) {
    throw std::invalid_argument("sweep requires at least one gamma value");
  }
  for (double g : gammas) {
    if (!(g >= 0.0) || !std::isfinite(g)) {
      throw ValidationError("gammas", "every gamma must be finite and non-negative");
    }
  }
  const auto one = [&cfg](double gamma) {
    ScenarioConfig c = cfg;
    c.gamma_c = gamma;
    try {
      return summarize(gamma, run(c));
    } catch (const Error& e) {
      SweepRow row;
      row.gamma = gamma;
      row.error = e.what();
      return row;
    }
  };

  SweepResult result;
  result.rows.resize(gammas.size());
  for (std::size_t start = 0; start < gammas.size(); start += workers) {
    const std::size_t stop = std::min(gammas.size(), start + workers);
    std::vector<std::future<SweepRow>> batch;
    for (std::size_t i = start; i < stop; ++i) {
      batch.push_back(std::async(std::launch::async, one, gammas[i]));
    }
    for (std::size_t i = start; i < stop; ++i) {
      result.rows[i] = batch[i - start].get();
    }
  }
  return result;
}

}  // namespace icl_sfm
