#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "icl_sfm/errors.hpp"
#include "icl_sfm/geometry.hpp"
#include "icl_sfm/observer.hpp"
#include "icl_sfm/planner.hpp"
#include "icl_sfm/scene.hpp"

namespace icl_sfm {

enum class InitMode { Zero, Truth, Values };
enum class OrientationMode { Fixed, Feedback };

// Everything needed to reproduce one closed-loop run. Field defaults form the
// declared default scenario: a 1 m square of features in the world xy-plane,
// the goal 2 m above its centre looking down, and the camera 5 m from the goal
// at 45 degrees from the plane normal.
struct ScenarioConfig {
  double dt = 1e-3;
  double t_end = 20.0;
  std::uint64_t seed = 1;

  ObserverConfig observer{};
  ObserverGains gains{};
  InitMode init_mode = InitMode::Zero;
  InitialEstimates init_values{};

  Mat3 q_c = Mat3::Identity();
  Mat3 r_c = Mat3::Identity();
  double gamma_c = 0.0;
  GoalEstimateMode goal_mode = GoalEstimateMode::Mean;
  std::size_t goal_anchor = 0;
  OrientationMode orientation = OrientationMode::Fixed;
  double k_omega = 1.0;

  std::vector<Vec3> features_world{Vec3(0.5, 0.5, 0.0), Vec3(-0.5, 0.5, 0.0), Vec3(-0.5, -0.5, 0.0),
                                   Vec3(0.5, -0.5, 0.0)};
  std::optional<std::vector<Vec3>> features_goal;
  std::array<std::size_t, 3> plane_indices{0, 1, 2};
  Vec3 goal_position = Vec3(0.0, 0.0, 2.0);
  UnitQuaternion goal_orientation = UnitQuaternion(0.0, 1.0, 0.0, 0.0);
  Vec3 camera_position = Vec3(5.0 * M_SQRT1_2, 0.0, 2.0 + 5.0 * M_SQRT1_2);
  UnitQuaternion camera_orientation = UnitQuaternion(0.0, 1.0, 0.0, 0.0);
  Mat3 intrinsics = CameraIntrinsics::pinhole(800.0, 800.0, 320.0, 240.0).a;
  double fov_half_angle = M_PI / 3.0;

  NoiseModel noise{};

  [[nodiscard]] std::size_t step_count() const { return static_cast<std::size_t>(std::llround(t_end / dt)); }

  [[nodiscard]] FeatureSet feature_set() const {
    return make_feature_set(features_world, goal_position, goal_orientation, plane_indices);
  }

  [[nodiscard]] CameraState initial_state() const {
    return CameraState::from_world(camera_position, camera_orientation, goal_position, goal_orientation, 0.0);
  }
};

[[nodiscard]] inline ScenarioConfig default_config() {
  ScenarioConfig cfg;
  cfg.observer.admission_interval = 0.5 * cfg.observer.window_length;
  return cfg;
}

// Checks every invariant; throws ValidationError naming the offending key.
inline void validate(const ScenarioConfig& c) {
  const auto require = [](bool ok, const char* key, const std::string& what) {
    if (!ok) {
      throw ValidationError(key, what);
    }
  };
  require(c.dt > 0.0 && std::isfinite(c.dt), "dt", "must be positive");
  require(c.observer.window_length >= 2.0 * c.dt, "observer.window_length", "must be at least 2*dt");
  require(std::isfinite(c.t_end) && c.t_end > c.observer.window_length, "t_end", "must exceed observer.window_length");
  require(c.observer.stack_size >= 1, "observer.stack_size", "must be an integer >= 1");
  require(c.observer.lambda_tau > 0.0, "observer.lambda_tau", "must be positive");
  require(c.observer.admission_interval > 0.0, "observer.admission_interval", "must be positive");
  require(c.observer.info_floor >= 0.0, "observer.info_floor", "must be non-negative");
  require(c.gains.kappa1 > 0.0, "observer.kappa1", "must be positive");
  require(c.gains.kappa2 > 0.0, "observer.kappa2", "must be positive");
  require(c.gains.kappa3 > 0.0, "observer.kappa3", "must be positive");
  require(c.gamma_c >= 0.0 && std::isfinite(c.gamma_c), "planner.gamma_c", "must be non-negative");
  require(c.k_omega > 0.0, "planner.k_omega", "must be positive");
  require(c.noise.pixel_sigma >= 0.0, "noise.pixel_sigma", "must be non-negative");
  require(c.noise.rotation_sigma >= 0.0, "noise.rotation_sigma", "must be non-negative");
  require(c.fov_half_angle > 0.0 && c.fov_half_angle < M_PI / 2.0, "scene.fov_half_angle_deg",
          "must lie in (0, 90) degrees");

  try {
    (void)SymPosDef(c.q_c);
  } catch (const NotSPD& e) {
    throw ValidationError("planner.q_c", e.what());
  }
  try {
    (void)SymPosDef(c.r_c);
  } catch (const NotSPD& e) {
    throw ValidationError("planner.r_c", e.what());
  }
  try {
    (void)CameraIntrinsics(c.intrinsics);
  } catch (const DegenerateGeometry& e) {
    throw ValidationError("scene.intrinsics", e.what());
  }

  const std::size_t n = c.features_world.size();
  require(n >= 4, "scene.features_world", "at least four features are required");
  FeatureSet fs;
  try {
    fs = c.feature_set();
  } catch (const DegenerateGeometry& e) {
    const std::string what = e.what();
    throw ValidationError(what.find("plane ind") != std::string::npos ? "scene.plane_indices" : "scene.features_world",
                          what);
  }
  if (c.features_goal) {
    require(c.features_goal->size() == n, "scene.features_goal", "must list one point per world feature");
    for (std::size_t i = 0; i < n; ++i) {
      require(((*c.features_goal)[i] - fs.features_goal[i]).norm() <= 1e-9, "scene.features_goal",
              "inconsistent with features_world and the goal pose");
    }
  }
  require(c.observer.anchor < n, "observer.anchor", "feature index out of range");
  require(c.goal_anchor < n, "planner.anchor", "feature index out of range");
  if (c.init_mode == InitMode::Values) {
    require(c.init_values.d_c_s.size() == n, "observer.initial_estimates.d_c_s", "must have one value per feature");
    require(c.init_values.d_g_s.size() == n, "observer.initial_estimates.d_g_s", "must have one value per feature");
  }
}

namespace detail {

using Json = nlohmann::json;

class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ParseError(path_.empty() ? "<root>" : path_, "expected an object");
    }
  }

  [[nodiscard]] std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  [[nodiscard]] bool has(const std::string& k) const { return j_.contains(k); }

  // Rejects any key not in the allowed set.
  void only(std::initializer_list<const char*> allowed) const {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : j_.items()) {
      if (!ok.contains(item.key())) {
        throw ValidationError(key(item.key()), "unknown key");
      }
    }
  }

  [[nodiscard]] const Json& at(const std::string& k) const { return j_.at(k); }

  [[nodiscard]] double number(const std::string& k) const {
    const Json& v = j_.at(k);
    if (!v.is_number()) {
      throw ParseError(key(k), "expected a number");
    }
    return v.get<double>();
  }

  void number(const std::string& k, double& out) const {
    if (has(k)) {
      out = number(k);
    }
  }

  void integer(const std::string& k, int& out) const {
    if (!has(k)) {
      return;
    }
    const Json& v = j_.at(k);
    if (!v.is_number_integer()) {
      throw ParseError(key(k), "expected an integer");
    }
    out = v.get<int>();
  }

  void index(const std::string& k, std::size_t& out) const {
    if (!has(k)) {
      return;
    }
    const Json& v = j_.at(k);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ParseError(key(k), "expected a non-negative integer");
    }
    out = v.get<std::size_t>();
  }

  void text(const std::string& k, std::string& out) const {
    if (!has(k)) {
      return;
    }
    const Json& v = j_.at(k);
    if (!v.is_string()) {
      throw ParseError(key(k), "expected a string");
    }
    out = v.get<std::string>();
  }

  [[nodiscard]] std::vector<double> numbers(const std::string& k, std::optional<std::size_t> len = {}) const {
    const Json& v = j_.at(k);
    if (!v.is_array()) {
      throw ParseError(key(k), "expected an array of numbers");
    }
    std::vector<double> out;
    for (const Json& e : v) {
      if (!e.is_number()) {
        throw ParseError(key(k), "expected an array of numbers");
      }
      out.push_back(e.get<double>());
    }
    if (len && out.size() != *len) {
      throw ParseError(key(k), "expected " + std::to_string(*len) + " numbers");
    }
    return out;
  }

  [[nodiscard]] Vec3 vec3(const std::string& k) const {
    const auto v = numbers(k, 3);
    return {v[0], v[1], v[2]};
  }

  [[nodiscard]] std::vector<Vec3> points(const std::string& k) const {
    const Json& v = j_.at(k);
    if (!v.is_array()) {
      throw ParseError(key(k), "expected an array of 3-vectors");
    }
    std::vector<Vec3> out;
    for (const Json& e : v) {
      if (!e.is_array() || e.size() != 3 || !e[0].is_number() || !e[1].is_number() || !e[2].is_number()) {
        throw ParseError(key(k), "expected an array of 3-vectors");
      }
      out.emplace_back(e[0].get<double>(), e[1].get<double>(), e[2].get<double>());
    }
    return out;
  }

  [[nodiscard]] Mat3 mat3(const std::string& k) const {
    const auto rows = points(k);
    if (rows.size() != 3) {
      throw ParseError(key(k), "expected a 3x3 matrix as three rows");
    }
    Mat3 m;
    for (int r = 0; r < 3; ++r) {
      m.row(r) = rows[static_cast<std::size_t>(r)].transpose();
    }
    return m;
  }

  [[nodiscard]] UnitQuaternion quaternion(const std::string& k) const {
    const auto v = numbers(k, 4);
    try {
      return {v[0], v[1], v[2], v[3]};
    } catch (const DegenerateGeometry&) {
      throw ValidationError(key(k), "quaternion must be non-zero");
    }
  }

  [[nodiscard]] Reader child(const std::string& k) const { return {j_.at(k), key(k)}; }

 private:
  const Json& j_;
  std::string path_;
};

}  // namespace detail

// Builds a validated configuration from JSON text. dt and t_end are required;
// every other key is optional and falls back to the default scenario.
[[nodiscard]] inline ScenarioConfig parse_config(const std::string& text) {
  detail::Json root;
  try {
    root = detail::Json::parse(text);
  } catch (const detail::Json::parse_error& e) {
    throw ParseError("<document>", std::string("malformed JSON: ") + e.what());
  }
  ScenarioConfig c = default_config();
  const detail::Reader r(root, "");
  r.only({"dt", "t_end", "seed", "observer", "planner", "scene", "noise"});
  for (const char* k : {"dt", "t_end"}) {
    if (!r.has(k)) {
      throw ValidationError(k, "required key is missing");
    }
  }
  c.dt = r.number("dt");
  c.t_end = r.number("t_end");
  if (r.has("seed")) {
    const auto& v = r.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ParseError("seed", "expected a non-negative integer");
    }
    c.seed = v.get<std::uint64_t>();
  }

  bool admission_given = false;
  if (r.has("observer")) {
    const auto o = r.child("observer");
    o.only({"window_length", "stack_size", "lambda_tau", "admission_interval", "info_floor", "kappa1", "kappa2",
            "kappa3", "goal_fusion", "anchor", "initial_estimates"});
    o.number("window_length", c.observer.window_length);
    o.integer("stack_size", c.observer.stack_size);
    o.number("lambda_tau", c.observer.lambda_tau);
    admission_given = o.has("admission_interval");
    o.number("admission_interval", c.observer.admission_interval);
    o.number("info_floor", c.observer.info_floor);
    o.number("kappa1", c.gains.kappa1);
    o.number("kappa2", c.gains.kappa2);
    o.number("kappa3", c.gains.kappa3);
    o.index("anchor", c.observer.anchor);
    std::string fusion = "anchor";
    o.text("goal_fusion", fusion);
    if (fusion == "anchor") {
      c.observer.fusion = GoalFusion::Anchor;
    } else if (fusion == "average") {
      c.observer.fusion = GoalFusion::Average;
    } else {
      throw ValidationError(o.key("goal_fusion"), "expected \"anchor\" or \"average\"");
    }
    if (o.has("initial_estimates")) {
      const auto ie = o.child("initial_estimates");
      ie.only({"mode", "d_c_s", "d_c_g", "d_g_s"});
      std::string mode = "zero";
      ie.text("mode", mode);
      if (mode == "zero") {
        c.init_mode = InitMode::Zero;
      } else if (mode == "truth") {
        c.init_mode = InitMode::Truth;
      } else if (mode == "values") {
        c.init_mode = InitMode::Values;
        for (const char* k : {"d_c_s", "d_c_g", "d_g_s"}) {
          if (!ie.has(k)) {
            throw ValidationError(ie.key(k), "required when mode is \"values\"");
          }
        }
        c.init_values.d_c_s = ie.numbers("d_c_s");
        c.init_values.d_c_g = ie.number("d_c_g");
        c.init_values.d_g_s = ie.numbers("d_g_s");
      } else {
        throw ValidationError(ie.key("mode"), "expected \"zero\", \"truth\" or \"values\"");
      }
    }
  }
  if (!admission_given) {
    c.observer.admission_interval = 0.5 * c.observer.window_length;
  }

  if (r.has("planner")) {
    const auto p = r.child("planner");
    p.only({"q_c", "r_c", "gamma_c", "goal_estimate", "anchor", "orientation", "k_omega"});
    if (p.has("q_c")) {
      c.q_c = p.mat3("q_c");
    }
    if (p.has("r_c")) {
      c.r_c = p.mat3("r_c");
    }
    p.number("gamma_c", c.gamma_c);
    p.index("anchor", c.goal_anchor);
    p.number("k_omega", c.k_omega);
    std::string mode = "mean";
    p.text("goal_estimate", mode);
    if (mode == "mean") {
      c.goal_mode = GoalEstimateMode::Mean;
    } else if (mode == "anchor") {
      c.goal_mode = GoalEstimateMode::Anchor;
    } else {
      throw ValidationError(p.key("goal_estimate"), "expected \"mean\" or \"anchor\"");
    }
    std::string orient = "fixed";
    p.text("orientation", orient);
    if (orient == "fixed") {
      c.orientation = OrientationMode::Fixed;
    } else if (orient == "feedback") {
      c.orientation = OrientationMode::Feedback;
    } else {
      throw ValidationError(p.key("orientation"), "expected \"fixed\" or \"feedback\"");
    }
  }

  if (r.has("scene")) {
    const auto s = r.child("scene");
    s.only({"features_world", "features_goal", "plane_indices", "goal_position", "goal_orientation",
            "camera_position", "camera_orientation", "intrinsics", "fov_half_angle_deg"});
    if (s.has("features_world")) {
      c.features_world = s.points("features_world");
    }
    if (s.has("features_goal")) {
      c.features_goal = s.points("features_goal");
    }
    if (s.has("plane_indices")) {
      const auto& v = s.at("plane_indices");
      if (!v.is_array() || v.size() != 3) {
        throw ParseError(s.key("plane_indices"), "expected three feature indices");
      }
      for (std::size_t i = 0; i < 3; ++i) {
        if (!v[i].is_number_integer() || v[i].get<long long>() < 0) {
          throw ParseError(s.key("plane_indices"), "expected three feature indices");
        }
        c.plane_indices[i] = v[i].get<std::size_t>();
      }
    }
    if (s.has("goal_position")) {
      c.goal_position = s.vec3("goal_position");
    }
    if (s.has("goal_orientation")) {
      c.goal_orientation = s.quaternion("goal_orientation");
    }
    if (s.has("camera_position")) {
      c.camera_position = s.vec3("camera_position");
    }
    if (s.has("camera_orientation")) {
      c.camera_orientation = s.quaternion("camera_orientation");
    }
    if (s.has("intrinsics")) {
      c.intrinsics = s.mat3("intrinsics");
    }
    if (s.has("fov_half_angle_deg")) {
      c.fov_half_angle = s.number("fov_half_angle_deg") * M_PI / 180.0;
    }
  }

  if (r.has("noise")) {
    const auto nz = r.child("noise");
    nz.only({"pixel_sigma", "rotation_sigma"});
    nz.number("pixel_sigma", c.noise.pixel_sigma);
    nz.number("rotation_sigma", c.noise.rotation_sigma);
  }
  c.noise.seed = c.seed;

  validate(c);
  return c;
}

[[nodiscard]] inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open config file '" + path + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// Serializes a configuration back to the file schema (used to echo the
// effective configuration next to run artifacts).
[[nodiscard]] inline std::string config_to_json(const ScenarioConfig& c) {
  using detail::Json;
  const auto v3 = [](const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); };
  const auto m3 = [&](const Mat3& m) {
    return Json::array({v3(m.row(0).transpose()), v3(m.row(1).transpose()), v3(m.row(2).transpose())});
  };
  const auto q4 = [](const UnitQuaternion& q) {
    const Vec4& x = q.coeffs();
    return Json::array({x(0), x(1), x(2), x(3)});
  };
  const auto pts = [&](const std::vector<Vec3>& ps) {
    Json a = Json::array();
    for (const Vec3& p : ps) {
      a.push_back(v3(p));
    }
    return a;
  };

  Json init;
  switch (c.init_mode) {
    case InitMode::Zero:
      init = {{"mode", "zero"}};
      break;
    case InitMode::Truth:
      init = {{"mode", "truth"}};
      break;
    case InitMode::Values:
      init = {{"mode", "values"},
              {"d_c_s", c.init_values.d_c_s},
              {"d_c_g", c.init_values.d_c_g},
              {"d_g_s", c.init_values.d_g_s}};
      break;
  }

  Json scene = {{"features_world", pts(c.features_world)},
                {"plane_indices", Json::array({c.plane_indices[0], c.plane_indices[1], c.plane_indices[2]})},
                {"goal_position", v3(c.goal_position)},
                {"goal_orientation", q4(c.goal_orientation)},
                {"camera_position", v3(c.camera_position)},
                {"camera_orientation", q4(c.camera_orientation)},
                {"intrinsics", m3(c.intrinsics)},
                {"fov_half_angle_deg", c.fov_half_angle * 180.0 / M_PI}};
  if (c.features_goal) {
    scene["features_goal"] = pts(*c.features_goal);
  }

  Json j = {
      {"dt", c.dt},
      {"t_end", c.t_end},
      {"seed", c.seed},
      {"observer",
       {{"window_length", c.observer.window_length},
        {"stack_size", c.observer.stack_size},
        {"lambda_tau", c.observer.lambda_tau},
        {"admission_interval", c.observer.admission_interval},
        {"info_floor", c.observer.info_floor},
        {"kappa1", c.gains.kappa1},
        {"kappa2", c.gains.kappa2},
        {"kappa3", c.gains.kappa3},
        {"goal_fusion", c.observer.fusion == GoalFusion::Anchor ? "anchor" : "average"},
        {"anchor", c.observer.anchor},
        {"initial_estimates", init}}},
      {"planner",
       {{"q_c", m3(c.q_c)},
        {"r_c", m3(c.r_c)},
        {"gamma_c", c.gamma_c},
        {"goal_estimate", c.goal_mode == GoalEstimateMode::Mean ? "mean" : "anchor"},
        {"anchor", c.goal_anchor},
        {"orientation", c.orientation == OrientationMode::Fixed ? "fixed" : "feedback"},
        {"k_omega", c.k_omega}}},
      {"scene", scene},
      {"noise", {{"pixel_sigma", c.noise.pixel_sigma}, {"rotation_sigma", c.noise.rotation_sigma}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace icl_sfm
