#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "soilpick/control.hpp"
#include "soilpick/experiment.hpp"
#include "soilpick/geometry.hpp"
#include "soilpick/planner.hpp"
#include "soilpick/scenario.hpp"
#include "soilpick/terrain.hpp"
#include "soilpick/vision.hpp"

namespace soilpick {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void check_keys(const json& j, std::string_view what, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == k;
    if (!ok) throw ConfigError(std::string(what) + ": unknown key '" + k + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (const auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

}  // namespace detail

// --- basic types -----------------------------------------------------------

inline json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-vector");
  return Vec3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json pose_json(const Pose& p) {
  json r = json::array();
  for (int i = 0; i < 3; ++i) r.push_back(json::array({p.rotation()(i, 0), p.rotation()(i, 1), p.rotation()(i, 2)}));
  return {{"rotation", r}, {"translation", vec_json(p.translation())}};
}

/// Accepts {"rotation": 3x3 rows} or {"rpy": [roll, pitch, yaw]} plus
/// "translation".
inline Pose pose_from(const json& j) {
  detail::check_keys(j, "pose", {"rotation", "rpy", "translation"});
  const Vec3 t = j.contains("translation") ? vec_from(j["translation"]) : Vec3::Zero();
  if (j.contains("rotation") && j.contains("rpy")) throw ConfigError("pose: give rotation or rpy, not both");
  if (j.contains("rpy")) {
    const Vec3 rpy = vec_from(j["rpy"]);
    return compose(Pose::translation(t), Pose::from_rpy(rpy.x(), rpy.y(), rpy.z()));
  }
  if (!j.contains("rotation")) return Pose::translation(t);
  const json& r = j["rotation"];
  if (!r.is_array() || r.size() != 3) throw ConfigError("pose: rotation must be 3 rows");
  Mat3 m;
  for (int i = 0; i < 3; ++i) {
    const Vec3 row = vec_from(r[static_cast<std::size_t>(i)]);
    m.row(i) = row.transpose();
  }
  try {
    return Pose(m, t);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("pose: ") + e.what());
  }
}

inline json rgb_json(const Rgb& c) { return json::array({c.r, c.g, c.b}); }

inline Rgb rgb_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected an RGB triple");
  return Rgb{j[0].get<float>(), j[1].get<float>(), j[2].get<float>()};
}

inline json intrinsics_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

// --- configs ---------------------------------------------------------------

inline json to_json(const AlbedoBand& b) { return {{"mean", rgb_json(b.mean)}, {"jitter", b.jitter}}; }

inline void from_json(const json& j, AlbedoBand& b) {
  detail::check_keys(j, "albedo", {"mean", "jitter"});
  if (j.contains("mean")) b.mean = rgb_from(j["mean"]);
  detail::read(j, "jitter", b.jitter);
}

inline json to_json(const TerrainConfig& c) {
  return {{"bed_size", c.bed_size},
          {"cells", c.cells},
          {"soil_depth", c.soil_depth},
          {"surface_z", c.surface_z},
          {"origin_x", c.origin_x},
          {"origin_y", c.origin_y},
          {"rock_fraction", c.rock_fraction},
          {"rock_cluster_radius", c.rock_cluster_radius},
          {"height_roughness", c.height_roughness},
          {"rock_height", c.rock_height},
          {"soil_albedo", to_json(c.soil_albedo)},
          {"rock_albedo", to_json(c.rock_albedo)}};
}

inline void from_json(const json& j, TerrainConfig& c) {
  detail::check_keys(j, "terrain",
                     {"bed_size", "cells", "soil_depth", "surface_z", "origin_x", "origin_y", "rock_fraction",
                      "rock_cluster_radius", "height_roughness", "rock_height", "soil_albedo", "rock_albedo"});
  detail::read(j, "bed_size", c.bed_size);
  detail::read(j, "cells", c.cells);
  detail::read(j, "soil_depth", c.soil_depth);
  detail::read(j, "surface_z", c.surface_z);
  detail::read(j, "origin_x", c.origin_x);
  detail::read(j, "origin_y", c.origin_y);
  detail::read(j, "rock_fraction", c.rock_fraction);
  detail::read(j, "rock_cluster_radius", c.rock_cluster_radius);
  detail::read(j, "height_roughness", c.height_roughness);
  detail::read(j, "rock_height", c.rock_height);
  if (j.contains("soil_albedo")) from_json(j["soil_albedo"], c.soil_albedo);
  if (j.contains("rock_albedo")) from_json(j["rock_albedo"], c.rock_albedo);
}

inline json to_json(const RenderConfig& c) {
  return {{"background", rgb_json(c.background)}, {"light_dir", vec_json(c.light_dir)}, {"ambient", c.ambient}};
}

inline void from_json(const json& j, RenderConfig& c) {
  detail::check_keys(j, "render", {"background", "light_dir", "ambient"});
  if (j.contains("background")) c.background = rgb_from(j["background"]);
  if (j.contains("light_dir")) c.light_dir = vec_from(j["light_dir"]);
  detail::read(j, "ambient", c.ambient);
}

inline json to_json(const DepthNoiseModel& n) {
  return {{"sigma0", n.sigma0}, {"sigma_slope", n.sigma_slope}, {"rock_bias", n.rock_bias}};
}

inline void from_json(const json& j, DepthNoiseModel& n) {
  detail::check_keys(j, "noise", {"sigma0", "sigma_slope", "rock_bias"});
  detail::read(j, "sigma0", n.sigma0);
  detail::read(j, "sigma_slope", n.sigma_slope);
  detail::read(j, "rock_bias", n.rock_bias);
}

inline json to_json(const Box& b) { return {{"lo", vec_json(b.lo)}, {"hi", vec_json(b.hi)}}; }

inline Box box_from(const json& j) {
  detail::check_keys(j, "box", {"lo", "hi"});
  return Box{vec_from(j.at("lo")), vec_from(j.at("hi"))};
}

inline json to_json(const Workspace& w) {
  json boxes = json::array();
  for (const auto& b : w.static_obstacles) boxes.push_back(to_json(b));
  return {{"reach_radius", w.reach_radius},
          {"base_position", vec_json(w.base_position)},
          {"static_obstacles", boxes},
          {"floor_z", w.floor_z}};
}

inline void from_json(const json& j, Workspace& w) {
  detail::check_keys(j, "workspace", {"reach_radius", "base_position", "static_obstacles", "floor_z"});
  detail::read(j, "reach_radius", w.reach_radius);
  if (j.contains("base_position")) w.base_position = vec_from(j["base_position"]);
  if (j.contains("static_obstacles")) {
    w.static_obstacles.clear();
    for (const auto& b : j["static_obstacles"]) w.static_obstacles.push_back(box_from(b));
  }
  detail::read(j, "floor_z", w.floor_z);
}

inline json to_json(const PlannerConfig& c) {
  return {{"step_size", c.step_size},
          {"rewire_radius_gamma", c.rewire_radius_gamma},
          {"goal_bias", c.goal_bias},
          {"max_iterations", c.max_iterations},
          {"goal_tolerance", c.goal_tolerance},
          {"seed", c.seed}};
}

inline void from_json(const json& j, PlannerConfig& c) {
  detail::check_keys(j, "planner",
                     {"step_size", "rewire_radius_gamma", "goal_bias", "max_iterations", "goal_tolerance", "seed"});
  detail::read(j, "step_size", c.step_size);
  detail::read(j, "rewire_radius_gamma", c.rewire_radius_gamma);
  detail::read(j, "goal_bias", c.goal_bias);
  detail::read(j, "max_iterations", c.max_iterations);
  detail::read(j, "goal_tolerance", c.goal_tolerance);
  detail::read(j, "seed", c.seed);
}

inline json to_json(const ControllerConfig& c) {
  return {{"kp", c.kp},           {"ki", c.ki},
          {"kd", c.kd},           {"setpoint", c.setpoint},
          {"tolerance", c.tolerance}, {"max_steps", c.max_steps}};
}

inline void from_json(const json& j, ControllerConfig& c) {
  detail::check_keys(j, "controller", {"kp", "ki", "kd", "setpoint", "tolerance", "max_steps"});
  detail::read(j, "kp", c.kp);
  detail::read(j, "ki", c.ki);
  detail::read(j, "kd", c.kd);
  detail::read(j, "setpoint", c.setpoint);
  detail::read(j, "tolerance", c.tolerance);
  detail::read(j, "max_steps", c.max_steps);
}

inline json to_json(const GraspModel& g) {
  return {{"min_offset", g.min_offset},
          {"max_offset", g.max_offset},
          {"retention_prob", g.retention_prob},
          {"deadlock_prob_per_plan", g.deadlock_prob_per_plan},
          {"footprint_radius", g.footprint_radius},
          {"scoop_depth", g.scoop_depth}};
}

inline void from_json(const json& j, GraspModel& g) {
  detail::check_keys(j, "grasp",
                     {"min_offset", "max_offset", "retention_prob", "deadlock_prob_per_plan", "footprint_radius",
                      "scoop_depth"});
  detail::read(j, "min_offset", g.min_offset);
  detail::read(j, "max_offset", g.max_offset);
  detail::read(j, "retention_prob", g.retention_prob);
  detail::read(j, "deadlock_prob_per_plan", g.deadlock_prob_per_plan);
  detail::read(j, "footprint_radius", g.footprint_radius);
  detail::read(j, "scoop_depth", g.scoop_depth);
}

inline json to_json(const SelectionConfig& s) {
  return {{"hover_height", s.hover_height},
          {"min_area", s.min_area},
          {"footprint_radius_px", s.footprint_radius_px},
          {"max_candidates", s.max_candidates}};
}

inline void from_json(const json& j, SelectionConfig& s) {
  detail::check_keys(j, "selection", {"hover_height", "min_area", "footprint_radius_px", "max_candidates"});
  detail::read(j, "hover_height", s.hover_height);
  detail::read(j, "min_area", s.min_area);
  detail::read(j, "footprint_radius_px", s.footprint_radius_px);
  detail::read(j, "max_candidates", s.max_candidates);
}

inline json to_json(const PickTiming& t) {
  return {{"capture", t.capture},   {"detect", t.detect},     {"select", t.select},
          {"plan", t.plan},         {"approach", t.approach}, {"dive_step", t.dive_step},
          {"grip", t.grip},         {"retract", t.retract},   {"deposit", t.deposit}};
}

inline void from_json(const json& j, PickTiming& t) {
  detail::check_keys(j, "timing",
                     {"capture", "detect", "select", "plan", "approach", "dive_step", "grip", "retract", "deposit"});
  detail::read(j, "capture", t.capture);
  detail::read(j, "detect", t.detect);
  detail::read(j, "select", t.select);
  detail::read(j, "plan", t.plan);
  detail::read(j, "approach", t.approach);
  detail::read(j, "dive_step", t.dive_step);
  detail::read(j, "grip", t.grip);
  detail::read(j, "retract", t.retract);
  detail::read(j, "deposit", t.deposit);
}

inline FailureCause interrupt_reason_from(const std::string& s) {
  if (s == "User") return FailureCause::InterruptedUser;
  if (s == "LowBattery") return FailureCause::InterruptedLowBattery;
  if (s == "MaxTime") return FailureCause::InterruptedMaxTime;
  throw ConfigError("unknown interrupt reason '" + s + "'");
}

inline std::string interrupt_reason_name(FailureCause c) {
  switch (c) {
    case FailureCause::InterruptedUser: return "User";
    case FailureCause::InterruptedLowBattery: return "LowBattery";
    case FailureCause::InterruptedMaxTime: return "MaxTime";
    default: throw std::invalid_argument("not an interrupt cause");
  }
}

inline json to_json(const PickLimits& l) {
  json events = json::array();
  for (const auto& e : l.events) events.push_back({{"time", e.time}, {"reason", interrupt_reason_name(e.reason)}});
  return {{"max_time", l.max_time},
          {"detect_retries", l.detect_retries},
          {"unreachable_retries", l.unreachable_retries},
          {"retry_on_grip", l.retry_on_grip},
          {"grip_retries", l.grip_retries},
          {"timing", to_json(l.timing)},
          {"events", events}};
}

inline void from_json(const json& j, PickLimits& l) {
  detail::check_keys(j, "limits",
                     {"max_time", "detect_retries", "unreachable_retries", "retry_on_grip", "grip_retries", "timing",
                      "events"});
  detail::read(j, "max_time", l.max_time);
  detail::read(j, "detect_retries", l.detect_retries);
  detail::read(j, "unreachable_retries", l.unreachable_retries);
  detail::read(j, "retry_on_grip", l.retry_on_grip);
  detail::read(j, "grip_retries", l.grip_retries);
  if (j.contains("timing")) from_json(j["timing"], l.timing);
  if (j.contains("events")) {
    l.events.clear();
    for (const auto& e : j["events"]) {
      detail::check_keys(e, "event", {"time", "reason"});
      l.events.push_back({e.at("time").get<double>(), interrupt_reason_from(e.value("reason", "User"))});
    }
  }
}

inline json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"augment", c.augment},
          {"seed", c.seed},
          {"pixels_per_image", c.pixels_per_image}};
}

inline void from_json(const json& j, TrainConfig& c) {
  detail::check_keys(j, "train", {"epochs", "batch_size", "learning_rate", "augment", "seed", "pixels_per_image"});
  detail::read(j, "epochs", c.epochs);
  detail::read(j, "batch_size", c.batch_size);
  detail::read(j, "learning_rate", c.learning_rate);
  detail::read(j, "augment", c.augment);
  detail::read(j, "seed", c.seed);
  detail::read(j, "pixels_per_image", c.pixels_per_image);
}

inline json to_json(const DatasetConfig& c) {
  return {{"count", c.count},
          {"native_width", c.native_width},
          {"native_height", c.native_height},
          {"size", c.size},
          {"min_camera_height", c.min_camera_height},
          {"max_camera_height", c.max_camera_height},
          {"min_rock_fraction", c.min_rock_fraction},
          {"max_rock_fraction", c.max_rock_fraction},
          {"ratios", c.ratios}};
}

inline void from_json(const json& j, DatasetConfig& c) {
  detail::check_keys(j, "dataset",
                     {"count", "native_width", "native_height", "size", "min_camera_height", "max_camera_height",
                      "min_rock_fraction", "max_rock_fraction", "ratios"});
  detail::read(j, "count", c.count);
  detail::read(j, "native_width", c.native_width);
  detail::read(j, "native_height", c.native_height);
  detail::read(j, "size", c.size);
  detail::read(j, "min_camera_height", c.min_camera_height);
  detail::read(j, "max_camera_height", c.max_camera_height);
  detail::read(j, "min_rock_fraction", c.min_rock_fraction);
  detail::read(j, "max_rock_fraction", c.max_rock_fraction);
  detail::read(j, "ratios", c.ratios);
  if (c.count < 1 || c.native_width < 1 || c.native_height < 1 || c.size < 1)
    throw ConfigError("dataset: count and sizes must be >= 1");
}

inline json to_json(const SegmenterConfig& c) {
  return {{"model_path", c.model_path}, {"dataset", to_json(c.dataset)}, {"train", to_json(c.train)}};
}

inline void from_json(const json& j, SegmenterConfig& c) {
  detail::check_keys(j, "segmenter", {"model_path", "dataset", "train"});
  detail::read(j, "model_path", c.model_path);
  if (j.contains("dataset")) from_json(j["dataset"], c.dataset);
  if (j.contains("train")) from_json(j["train"], c.train);
}

inline json to_json(const CameraConfig& c) {
  return {{"hfov_deg", c.hfov * 180.0 / std::numbers::pi},
          {"width", c.width},
          {"height", c.height},
          {"capture_pose", pose_json(c.capture_pose)},
          {"hand_eye", pose_json(c.hand_eye)}};
}

inline void from_json(const json& j, CameraConfig& c) {
  detail::check_keys(j, "camera", {"hfov_deg", "width", "height", "capture_pose", "hand_eye"});
  if (j.contains("hfov_deg")) c.hfov = deg_to_rad(j["hfov_deg"].get<double>());
  detail::read(j, "width", c.width);
  detail::read(j, "height", c.height);
  if (j.contains("capture_pose")) c.capture_pose = pose_from(j["capture_pose"]);
  if (j.contains("hand_eye")) c.hand_eye = pose_from(j["hand_eye"]);
}

inline json to_json(const Scenario& s) {
  return {{"name", s.name},
          {"n_trials", s.n_trials},
          {"base_seed", s.base_seed},
          {"confidence", s.confidence},
          {"workers", s.workers},
          {"terrain", to_json(s.terrain)},
          {"camera", to_json(s.camera)},
          {"render", to_json(s.render)},
          {"noise", to_json(s.noise)},
          {"workspace", to_json(s.workspace)},
          {"planner", to_json(s.planner)},
          {"controller", to_json(s.controller)},
          {"grasp", to_json(s.grasp)},
          {"selection", to_json(s.selection)},
          {"limits", to_json(s.limits)},
          {"segmenter", to_json(s.segmenter)}};
}

/// Missing keys keep their defaults; unknown keys are rejected. The result
/// is validated.
inline Scenario scenario_from(const json& j) {
  detail::check_keys(j, "scenario",
                     {"name", "n_trials", "base_seed", "confidence", "workers", "terrain", "camera", "render", "noise",
                      "workspace", "planner", "controller", "grasp", "selection", "limits", "segmenter"});
  Scenario s;
  try {
    detail::read(j, "name", s.name);
    detail::read(j, "n_trials", s.n_trials);
    detail::read(j, "base_seed", s.base_seed);
    detail::read(j, "confidence", s.confidence);
    detail::read(j, "workers", s.workers);
    if (j.contains("terrain")) from_json(j["terrain"], s.terrain);
    if (j.contains("camera")) from_json(j["camera"], s.camera);
    if (j.contains("render")) from_json(j["render"], s.render);
    if (j.contains("noise")) from_json(j["noise"], s.noise);
    if (j.contains("workspace")) from_json(j["workspace"], s.workspace);
    if (j.contains("planner")) from_json(j["planner"], s.planner);
    if (j.contains("controller")) from_json(j["controller"], s.controller);
    if (j.contains("grasp")) from_json(j["grasp"], s.grasp);
    if (j.contains("selection")) from_json(j["selection"], s.selection);
    if (j.contains("limits")) from_json(j["limits"], s.limits);
    if (j.contains("segmenter")) from_json(j["segmenter"], s.segmenter);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario '") + s.name + "': " + e.what());
  }
  if (s.n_trials < 1) throw ConfigError("scenario: n_trials must be >= 1");
  if (s.workers < 1) throw ConfigError("scenario: workers must be >= 1");
  try {
    normal_quantile_two_sided(s.confidence);
    s.camera.intrinsics();
    s.workspace.validate();
    s.planner.validate();
    s.controller.validate();
    s.grasp.validate();
    s.noise.validate();
    s.segmenter.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("scenario '") + s.name + "': " + e.what());
  }
  return s;
}

// --- data products ---------------------------------------------------------

inline json to_json(const SegmenterModel& m) {
  return {{"weights", m.weights}, {"threshold", m.threshold}, {"feature_version", m.feature_version}};
}

inline SegmenterModel model_from(const json& j) {
  detail::check_keys(j, "model", {"weights", "threshold", "feature_version"});
  SegmenterModel m;
  const auto& w = j.at("weights");
  if (!w.is_array() || w.size() != kFeatureCount)
    throw ConfigError("model: expected " + std::to_string(kFeatureCount) + " weights");
  m.weights = w.get<Features>();
  detail::read(j, "threshold", m.threshold);
  detail::read(j, "feature_version", m.feature_version);
  if (m.feature_version != kFeatureVersion)
    throw ConfigError("model: feature version '" + m.feature_version + "' does not match '" + kFeatureVersion + "'");
  return m;
}

inline json to_json(const TerrainGrid& t) {
  std::vector<int> mats;
  mats.reserve(t.materials().size());
  for (auto m : t.materials()) mats.push_back(static_cast<int>(m));
  json albedo = json::array();
  for (const auto& a : t.albedos()) albedo.push_back(rgb_json(a));
  return {{"nx", t.nx()},           {"ny", t.ny()},
          {"cell_size", t.cell_size()}, {"origin_x", t.origin_x()},
          {"origin_y", t.origin_y()},   {"floor_z", t.floor_z()},
          {"heights", t.heights()},     {"materials", mats},
          {"albedo", albedo}};
}

inline TerrainGrid terrain_from(const json& j) {
  detail::check_keys(j, "terrain grid",
                     {"nx", "ny", "cell_size", "origin_x", "origin_y", "floor_z", "heights", "materials", "albedo"});
  TerrainGrid t(j.at("nx").get<int>(), j.at("ny").get<int>(), j.at("cell_size").get<double>(),
                j.at("origin_x").get<double>(), j.at("origin_y").get<double>(), j.at("floor_z").get<double>());
  const auto& h = j.at("heights");
  const auto& m = j.at("materials");
  const auto& a = j.at("albedo");
  if (h.size() != t.cell_count() || m.size() != t.cell_count() || a.size() != t.cell_count())
    throw ConfigError("terrain grid: array sizes do not match nx*ny");
  for (int jj = 0; jj < t.ny(); ++jj)
    for (int i = 0; i < t.nx(); ++i) {
      const auto idx = static_cast<std::size_t>(jj * t.nx() + i);
      t.height(i, jj) = h[idx].get<double>();
      const int mat = m[idx].get<int>();
      if (mat < 0 || mat > 3) throw ConfigError("terrain grid: bad material code");
      t.material(i, jj) = static_cast<MaterialClass>(mat);
      t.albedo(i, jj) = rgb_from(a[idx]);
    }
  return t;
}

inline json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"iou", m.iou}};
}

inline json to_json(const Confusion& c) { return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}; }

inline json to_json(const VisionEval& e) {
  return {{"validation", to_json(e.validation)},
          {"test", to_json(e.test)},
          {"validation_counts", to_json(e.validation_counts)},
          {"test_counts", to_json(e.test_counts)}};
}

inline json to_json(const Region& r) {
  json c = json::array();
  for (const auto& p : r.contour) c.push_back(json::array({p.u, p.v}));
  return {{"area", r.area},
          {"centroid", json::array({r.centroid_u, r.centroid_v})},
          {"origin", json::array({r.origin.u, r.origin.v})},
          {"centroid_inside", r.centroid_inside},
          {"contour", c}};
}

inline json to_json(const Path& p) {
  json w = json::array();
  for (const auto& q : p.waypoints) w.push_back(vec_json(q));
  return {{"waypoints", w}, {"cost", p.cost}};
}

/// NaN (no return) is written as null.
inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json to_json(const PickReport& r) {
  json trace = json::array();
  for (const auto& t : r.trace) trace.push_back({{"state", to_string(t.state)}, {"time", t.time}});
  json dive = json::array();
  for (const auto& d : r.dive_profile)
    dive.push_back({{"measured", number_or_null(d.measured)}, {"commanded", d.commanded}});
  json targets = json::array();
  for (const auto& t : r.selected_targets)
    targets.push_back({{"position", vec_json(t.position)}, {"pixel", json::array({t.u, t.v})}, {"area", t.area}});
  json captures = json::array();
  for (const auto& c : r.captures)
    captures.push_back(
        {{"camera", pose_json(c.camera)}, {"time", c.time}, {"excavations_before", c.excavations_before}});
  json digs = json::array();
  for (const auto& e : r.excavations)
    digs.push_back({{"x", e.x}, {"y", e.y}, {"radius", e.radius}, {"depth", e.depth}, {"volume", e.volume}});
  return {{"success", r.success},
          {"outcome", r.success ? "Success" : (r.cause ? to_string(*r.cause) : "Unknown")},
          {"trace", trace},
          {"dive_profile", dive},
          {"retries_used", r.retries_used},
          {"selected_targets", targets},
          {"captures", captures},
          {"excavations", digs},
          {"approach_path", to_json(r.approach_path)},
          {"final_range", r.final_range ? json(*r.final_range) : json(nullptr)},
          {"log", r.log}};
}

inline json to_json(const ExperimentReport& e) {
  json counts = json::object();
  for (const auto& [k, v] : e.counts) counts[k] = v;
  json trials = json::array();
  for (const auto& t : e.trials) trials.push_back({{"index", t.index}, {"seed", t.seed}, {"report", to_json(t.report)}});
  return {{"scenario", e.scenario},
          {"n_trials", e.n_trials()},
          {"base_seed", e.base_seed},
          {"confidence", e.confidence},
          {"counts", counts},
          {"success_rate", e.fraction("Success")},
          {"wilson", {{"center", e.success_interval.center}, {"half_width", e.success_interval.half_width}}},
          {"trials", trials}};
}

inline json to_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json row = {{"name", r.name}, {"config", to_json(r.config)}};
    if (r.eval) {
      row["eval"] = to_json(*r.eval);
      row["validation_delta"] = to_json(r.validation_delta);
      row["test_delta"] = to_json(r.test_delta);
    } else {
      row["error"] = r.error;
    }
    out.push_back(row);
  }
  return out;
}

// --- files -----------------------------------------------------------------

inline json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

/// Pretty-printed with a trailing newline.
inline void write_json_file(const std::filesystem::path& p, const json& j) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

/// A config file holds one scenario object or {"scenarios": [...]}.
inline std::vector<Scenario> load_scenarios(const std::filesystem::path& p) {
  const json j = read_json_file(p);
  std::vector<Scenario> out;
  if (j.is_object() && j.contains("scenarios")) {
    if (j.size() != 1) throw ConfigError("config: 'scenarios' must be the only top-level key");
    for (const auto& s : j["scenarios"]) out.push_back(scenario_from(s));
    if (out.empty()) throw ConfigError("config: empty scenario list");
  } else {
    out.push_back(scenario_from(j));
  }
  return out;
}

}  // namespace soilpick
