#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "soilpick/contour.hpp"
#include "soilpick/geometry.hpp"
#include "soilpick/planner.hpp"
#include "soilpick/rng.hpp"
#include "soilpick/terrain.hpp"
#include "soilpick/vision.hpp"

namespace soilpick {

// ---------------------------------------------------------------------------
// Proportional dive controller

/// Proportional-only depth controller. ki and kd exist so the loop can be read
/// as a PID; they are fixed at zero and rejected otherwise.
struct ControllerConfig {
  double kp = 0.9;
  double ki = 0.0;
  double kd = 0.0;
  double setpoint = 0.27;  // sensor-to-ground range at the pick height
  double tolerance = 0.005;
  int max_steps = 25;

  void validate() const {
    if (!(kp > 0.0)) throw std::invalid_argument("ControllerConfig: kp must be positive");
    if (ki != 0.0 || kd != 0.0) throw std::invalid_argument("ControllerConfig: the dive controller is proportional only");
    if (!(setpoint > 0.0)) throw std::invalid_argument("ControllerConfig: setpoint must be positive");
    if (!(tolerance > 0.0)) throw std::invalid_argument("ControllerConfig: tolerance must be positive");
    if (max_steps < 0) throw std::invalid_argument("ControllerConfig: max_steps must be >= 0");
  }
};

/// Downward displacement for one control step; negative means move up.
inline double dive_step(const ControllerConfig& cfg, double measured) {
  return cfg.kp * (measured - cfg.setpoint);
}

struct DiveSample {
  double measured = 0.0;   // NaN when the sensor gave no return
  double commanded = 0.0;  // downward displacement applied after the reading
};

enum class DiveStatus { Converged, NotConverged, SensorDropout };

struct DiveResult {
  DiveStatus status = DiveStatus::NotConverged;
  double final_height = 0.0;
  int steps = 0;  // corrective moves applied
  std::vector<DiveSample> profile;

  bool converged() const noexcept { return status == DiveStatus::Converged; }
  int readings() const noexcept { return static_cast<int>(profile.size()); }
};

/// Returns the reading at the given sensor height, or nullopt for no return.
using DepthSensor = std::function<std::optional<double>(double height)>;

/// Measure -> command -> move until the reading is within tolerance of the
/// setpoint. Moves are exact; all noise comes from the sensor. Two
/// consecutive dropouts abort the dive.
inline DiveResult run_dive(double start_height, const DepthSensor& sensor, const ControllerConfig& cfg) {
  cfg.validate();
  DiveResult r;
  double h = start_height;
  int dropouts = 0;
  const int max_readings = 2 * cfg.max_steps + 2;
  while (r.readings() < max_readings) {
    const auto reading = sensor(h);
    if (!reading) {
      r.profile.push_back({std::numeric_limits<double>::quiet_NaN(), 0.0});
      if (++dropouts >= 2) {
        r.status = DiveStatus::SensorDropout;
        break;
      }
      continue;
    }
    dropouts = 0;
    if (std::abs(*reading - cfg.setpoint) <= cfg.tolerance) {
      r.profile.push_back({*reading, 0.0});
      r.status = DiveStatus::Converged;
      break;
    }
    if (r.steps >= cfg.max_steps) {
      r.profile.push_back({*reading, 0.0});
      r.status = DiveStatus::NotConverged;
      break;
    }
    const double move = dive_step(cfg, *reading);
    h -= move;
    ++r.steps;
    r.profile.push_back({*reading, move});
  }
  r.final_height = h;
  return r;
}

// ---------------------------------------------------------------------------
// Grip

/// Outcome model for closing the gripper: a depth window around the setpoint
/// plus Bernoulli retention, and a per-executed-plan deadlock probability.
struct GraspModel {
  double min_offset = -0.02;
  double max_offset = 0.03;
  double retention_prob = 0.92;
  double deadlock_prob_per_plan = 0.03;
  double footprint_radius = 0.03;  // excavation radius on a held sample
  double scoop_depth = 0.03;

  void validate() const {
    if (!(min_offset < max_offset)) throw std::invalid_argument("GraspModel: min_offset must be < max_offset");
    for (double p : {retention_prob, deadlock_prob_per_plan})
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("GraspModel: probabilities must lie in [0, 1]");
  }
};

enum class GripOutcome { Held, DiveFail, GripFail };

/// A final range outside the window is a dive failure. Closing on anything
/// but soil never holds a sample.
inline GripOutcome attempt_grip(double final_range, MaterialClass under_gripper, const GraspModel& g,
                                const ControllerConfig& cfg, Rng& rng) {
  if (final_range < cfg.setpoint + g.min_offset || final_range > cfg.setpoint + g.max_offset)
    return GripOutcome::DiveFail;
  const bool retained = rng.bernoulli(g.retention_prob);
  if (!pickable(under_gripper)) return GripOutcome::GripFail;
  return retained ? GripOutcome::Held : GripOutcome::GripFail;
}

// ---------------------------------------------------------------------------
// Pick state machine

enum class PickState {
  Start,
  Capture,
  Detect,
  SelectTarget,
  PlanApproach,
  Approach,
  Dive,
  Grip,
  Retract,
  Deposit,
  Success,
  Failed
};

inline constexpr const char* to_string(PickState s) {
  switch (s) {
    case PickState::Start: return "Start";
    case PickState::Capture: return "Capture";
    case PickState::Detect: return "Detect";
    case PickState::SelectTarget: return "SelectTarget";
    case PickState::PlanApproach: return "PlanApproach";
    case PickState::Approach: return "Approach";
    case PickState::Dive: return "Dive";
    case PickState::Grip: return "Grip";
    case PickState::Retract: return "Retract";
    case PickState::Deposit: return "Deposit";
    case PickState::Success: return "Success";
    case PickState::Failed: return "Failed";
  }
  return "?";
}

enum class FailureCause {
  NoTargets,
  Unreachable,
  DiveFail,
  GripFail,
  Deadlock,
  InterruptedMaxTime,
  InterruptedUser,
  InterruptedLowBattery
};

inline constexpr const char* to_string(FailureCause c) {
  switch (c) {
    case FailureCause::NoTargets: return "NoTargets";
    case FailureCause::Unreachable: return "Unreachable";
    case FailureCause::DiveFail: return "DiveFail";
    case FailureCause::GripFail: return "GripFail";
    case FailureCause::Deadlock: return "Deadlock";
    case FailureCause::InterruptedMaxTime: return "Interrupted(MaxTime)";
    case FailureCause::InterruptedUser: return "Interrupted(User)";
    case FailureCause::InterruptedLowBattery: return "Interrupted(LowBattery)";
  }
  return "?";
}

inline constexpr std::array<FailureCause, 8> kAllFailureCauses{
    FailureCause::NoTargets,          FailureCause::Unreachable,     FailureCause::DiveFail,
    FailureCause::GripFail,           FailureCause::Deadlock,        FailureCause::InterruptedMaxTime,
    FailureCause::InterruptedUser,    FailureCause::InterruptedLowBattery};

/// Values for the external interrupt flag.
enum class InterruptSignal : int { None = 0, User = 1, LowBattery = 2 };

/// Every edge of the pick machine. Any non-terminal state may also go to
/// Failed when an interrupt is observed at the state boundary.
inline bool is_legal_transition(PickState from, PickState to) {
  using S = PickState;
  if (to == S::Failed) return from != S::Success && from != S::Failed;
  switch (from) {
    case S::Start: return to == S::Capture;
    case S::Capture: return to == S::Detect;
    case S::Detect: return to == S::SelectTarget || to == S::Capture;
    case S::SelectTarget: return to == S::PlanApproach || to == S::Detect;
    case S::PlanApproach: return to == S::Approach || to == S::SelectTarget;
    case S::Approach: return to == S::Dive;
    case S::Dive: return to == S::Grip;
    case S::Grip: return to == S::Retract;
    case S::Retract: return to == S::Deposit || to == S::Capture;
    case S::Deposit: return to == S::Success;
    default: return false;
  }
}

/// Simulated seconds spent in each state.
struct PickTiming {
  double capture = 1.0;
  double detect = 0.5;
  double select = 0.1;
  double plan = 2.0;
  double approach = 6.0;
  double dive_step = 1.5;
  double grip = 2.0;
  double retract = 4.0;
  double deposit = 5.0;
};

struct InterruptEvent {
  double time = 0.0;  // simulated seconds
  FailureCause reason = FailureCause::InterruptedUser;
};

struct PickLimits {
  double max_time = 180.0;
  int detect_retries = 2;
  int unreachable_retries = 1;
  bool retry_on_grip = false;
  int grip_retries = 2;
  PickTiming timing;
  std::vector<InterruptEvent> events;
  const std::atomic<int>* interrupt = nullptr;  // InterruptSignal, polled at state boundaries
};

struct SelectionConfig {
  double hover_height = 0.40;
  std::size_t min_area = 200;
  int footprint_radius_px = 3;  // predicted mask must be pickable this close to the aim pixel
  std::size_t max_candidates = 5;
};

/// Everything a pick needs besides the world itself.
struct PickSystems {
  const Segmenter* segmenter = nullptr;
  CameraIntrinsics intrinsics;
  Pose capture_pose{looking_down(), Vec3{0.55, 0.0, 0.45}};  // tool (and IR sensor) pose when imaging
  Pose hand_eye;                                              // camera frame in tool frame
  Workspace workspace;
  PlannerConfig planner;
  ControllerConfig controller;
  GraspModel grasp;
  DepthNoiseModel noise;
  RenderConfig render;
  SelectionConfig selection;

  Pose camera_to_base() const { return compose(capture_pose, hand_eye); }
};

struct TraceEntry {
  PickState state;
  double time;
};

struct SelectedTarget {
  Vec3 position;
  double u = 0.0;
  double v = 0.0;
  std::size_t area = 0;
};

struct CaptureRecord {
  Pose camera;
  double time = 0.0;
  std::size_t excavations_before = 0;  // excavations applied before this frame
};

struct ExcavationRecord {
  double x = 0.0, y = 0.0, radius = 0.0, depth = 0.0, volume = 0.0;
};

struct PickReport {
  bool success = false;
  std::optional<FailureCause> cause;
  std::vector<TraceEntry> trace;
  std::vector<DiveSample> dive_profile;
  int retries_used = 0;
  std::vector<SelectedTarget> selected_targets;
  std::vector<CaptureRecord> captures;
  std::vector<ExcavationRecord> excavations;
  std::vector<std::string> log;
  Path approach_path;
  std::optional<double> final_range;
};

/// 1 where every pixel within `radius` is set (pixels off the image count as
/// unset).
inline Mask footprint_clear_map(const Mask& m, int radius) {
  Mask out(m.width(), m.height(), 0);
  for (int v = 0; v < m.height(); ++v)
    for (int u = 0; u < m.width(); ++u) {
      bool ok = true;
      for (int dv = -radius; dv <= radius && ok; ++dv)
        for (int du = -radius; du <= radius && ok; ++du)
          if (du * du + dv * dv <= radius * radius) ok = m.contains(u + du, v + dv) && m(u + du, v + dv);
      out(u, v) = ok ? 1 : 0;
    }
  return out;
}

namespace detail {

class PickMachine {
 public:
  PickMachine(TerrainGrid& world, const PickSystems& sys, const PickLimits& limits, Rng& rng)
      : world_(world), sys_(sys), limits_(limits), rng_(rng) {}

  PickReport run() {
    enter(PickState::Start);
    PickState next = PickState::Capture;
    while (true) {
      if (next == PickState::Success) {
        report_.trace.push_back({PickState::Success, clock_});
        report_.success = true;
        return report_;
      }
      if (next == PickState::Failed) {
        report_.trace.push_back({PickState::Failed, clock_});
        return report_;
      }
      if (const auto irq = pending_interrupt()) {
        report_.cause = *irq;
        next = PickState::Failed;
        continue;
      }
      enter(next);
      next = step(next);
    }
  }

 private:
  void enter(PickState s) {
    report_.trace.push_back({s, clock_});
    const PickTiming& t = limits_.timing;
    switch (s) {
      case PickState::Capture: clock_ += t.capture; break;
      case PickState::Detect: clock_ += t.detect; break;
      case PickState::SelectTarget: clock_ += t.select; break;
      case PickState::PlanApproach: clock_ += t.plan; break;
      case PickState::Approach: clock_ += t.approach; break;
      case PickState::Grip: clock_ += t.grip; break;
      case PickState::Retract: clock_ += t.retract; break;
      case PickState::Deposit: clock_ += t.deposit; break;
      default: break;
    }
  }

  std::optional<FailureCause> pending_interrupt() const {
    if (limits_.interrupt) {
      const auto sig = static_cast<InterruptSignal>(limits_.interrupt->load());
      if (sig == InterruptSignal::User) return FailureCause::InterruptedUser;
      if (sig == InterruptSignal::LowBattery) return FailureCause::InterruptedLowBattery;
    }
    for (const auto& e : limits_.events)
      if (e.time <= clock_) return e.reason;
    if (clock_ > limits_.max_time) return FailureCause::InterruptedMaxTime;
    return std::nullopt;
  }

  PickState fail(FailureCause c) {
    report_.cause = c;
    return PickState::Failed;
  }

  PickState step(PickState s) {
    switch (s) {
      case PickState::Capture: return capture();
      case PickState::Detect: return detect();
      case PickState::SelectTarget: return select();
      case PickState::PlanApproach: return plan();
      case PickState::Approach: return approach();
      case PickState::Dive: return dive();
      case PickState::Grip: return grip();
      case PickState::Retract: return retract();
      case PickState::Deposit: return PickState::Success;
      default: throw std::logic_error("PickMachine: no step for state");
    }
  }

  PickState capture() {
    const Pose cam = sys_.camera_to_base();
    frame_ = render_frame(world_, cam, sys_.intrinsics, sys_.render);
    report_.captures.push_back({cam, clock_, report_.excavations.size()});
    excluded_.clear();
    offered_.clear();
    return PickState::Detect;
  }

  PickState detect() {
    if (!detected_) {
      predicted_ = sys_.segmenter->segment(frame_.rgb);
      RegionMap map = label_regions(predicted_);
      labels_ = std::move(map.labels);
      clear_ = footprint_clear_map(predicted_, sys_.selection.footprint_radius_px);
      candidates_ = candidate_targets(map.regions, frame_.depth, sys_.intrinsics, sys_.camera_to_base(),
                                      sys_.selection.hover_height, sys_.selection.min_area);
      for (const auto& c : candidates_)
        if (!c.centroid_inside)
          report_.log.push_back("centroid outside its region at (" + std::to_string(c.source_u) + ", " +
                                std::to_string(c.source_v) + ")");
      detected_ = true;
    }
    // Offer the next-ranked candidates not yet offered.
    offered_.clear();
    for (std::size_t i = 0; i < candidates_.size() && offered_.size() < sys_.selection.max_candidates; ++i)
      if (!excluded_.contains(i)) offered_.push_back(i);
    if (offered_.empty()) {
      if (candidates_.empty() || excluded_.empty()) {
        if (detect_retries_ < limits_.detect_retries) {
          ++detect_retries_;
          ++report_.retries_used;
          detected_ = false;
          return PickState::Capture;
        }
        return fail(FailureCause::NoTargets);
      }
      return fail(FailureCause::Unreachable);
    }
    return PickState::SelectTarget;
  }

  /// Pixel to aim at: the centroid when the footprint there is clear, else
  /// the nearest clear pixel of the same region (ties in raster order).
  std::optional<PixelPoint> aim_pixel(const TargetCandidate& c) const {
    const int cu = static_cast<int>(std::lround(c.source_u));
    const int cv = static_cast<int>(std::lround(c.source_v));
    const int region = static_cast<int>(c.region_index);
    if (clear_.contains(cu, cv) && clear_(cu, cv) && labels_(cu, cv) == region) return PixelPoint{cu, cv};
    std::optional<PixelPoint> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (int v = 0; v < clear_.height(); ++v)
      for (int u = 0; u < clear_.width(); ++u) {
        if (!clear_(u, v) || labels_(u, v) != region) continue;
        const double d = (u - c.source_u) * (u - c.source_u) + (v - c.source_v) * (v - c.source_v);
        if (d < best_d) {
          best_d = d;
          best = PixelPoint{u, v};
        }
      }
    return best;
  }

  /// Largest approachable candidate among those offered.
  PickState select() {
    for (std::size_t i : offered_) {
      if (excluded_.contains(i)) continue;
      TargetCandidate& c = candidates_[i];
      if (const auto aim = aim_pixel(c)) {
        const double d = frame_.depth(aim->u, aim->v);
        if (d > 0.0 && std::isfinite(d)) {
          const double au = aim->u, av = aim->v;
          Vec3 p = transform_point(sys_.camera_to_base(), back_project(sys_.intrinsics, {au, av, d}));
          p.z() = sys_.selection.hover_height;
          if (reachable(p, sys_.workspace)) {
            c.position = p;
            target_ = i;
            report_.selected_targets.push_back({p, au, av, c.source_region_area});
            return PickState::PlanApproach;
          }
        }
      }
      excluded_.insert(i);
    }
    if (unreachable_retries_ < limits_.unreachable_retries) {
      ++unreachable_retries_;
      ++report_.retries_used;
      return PickState::Detect;
    }
    return fail(FailureCause::Unreachable);
  }

  PickState plan() {
    PlannerConfig cfg = sys_.planner;
    cfg.seed = rng_.bits();
    try {
      report_.approach_path = plan_rrt_star(sys_.capture_pose.translation(), candidates_[target_].position,
                                            sys_.workspace, cfg);
    } catch (const PlanningError& e) {
      report_.log.push_back(std::string("approach planning failed: ") + e.what());
      excluded_.insert(target_);
      return PickState::SelectTarget;
    }
    return PickState::Approach;
  }

  PickState approach() {
    if (rng_.bernoulli(sys_.grasp.deadlock_prob_per_plan)) return fail(FailureCause::Deadlock);
    return PickState::Dive;
  }

  Pose sensor_at(double height) const {
    const Vec3& p = candidates_[target_].position;
    return Pose(looking_down(), Vec3{p.x(), p.y(), height});
  }

  PickState dive() {
    const DepthSensor sensor = [this](double h) {
      return ir_depth_reading(world_, sensor_at(h), sys_.noise, rng_);
    };
    const DiveResult d = run_dive(sys_.selection.hover_height, sensor, sys_.controller);
    clock_ += limits_.timing.dive_step * static_cast<double>(d.readings());
    report_.dive_profile.insert(report_.dive_profile.end(), d.profile.begin(), d.profile.end());
    if (!d.converged()) return fail(FailureCause::DiveFail);
    dive_height_ = d.final_height;
    return PickState::Grip;
  }

  PickState grip() {
    const Pose sensor = sensor_at(dive_height_);
    const auto hit = cast_ray(world_, sensor.translation(), transform_direction(sensor, Vec3::UnitZ()));
    if (!hit) return fail(FailureCause::DiveFail);
    report_.final_range = hit->range;
    grip_ = attempt_grip(hit->range, world_.material(hit->i, hit->j), sys_.grasp, sys_.controller, rng_);
    if (grip_ == GripOutcome::DiveFail) return fail(FailureCause::DiveFail);
    return PickState::Retract;
  }

  PickState retract() {
    if (grip_ == GripOutcome::GripFail) {
      if (limits_.retry_on_grip && grip_retries_ < limits_.grip_retries) {
        ++grip_retries_;
        ++report_.retries_used;
        detected_ = false;
        return PickState::Capture;
      }
      return fail(FailureCause::GripFail);
    }
    const Vec3& p = candidates_[target_].position;
    const double vol = excavate(world_, p.x(), p.y(), sys_.grasp.footprint_radius, sys_.grasp.scoop_depth);
    report_.excavations.push_back({p.x(), p.y(), sys_.grasp.footprint_radius, sys_.grasp.scoop_depth, vol});
    return PickState::Deposit;
  }

  TerrainGrid& world_;
  const PickSystems& sys_;
  const PickLimits& limits_;
  Rng& rng_;
  PickReport report_;
  double clock_ = 0.0;

  Frame frame_;
  Mask predicted_;
  Mask clear_;
  Image<int> labels_;
  bool detected_ = false;
  std::vector<TargetCandidate> candidates_;
  std::vector<std::size_t> offered_;
  std::set<std::size_t> excluded_;
  std::size_t target_ = 0;
  double dive_height_ = 0.0;
  GripOutcome grip_ = GripOutcome::GripFail;
  int detect_retries_ = 0;
  int unreachable_retries_ = 0;
  int grip_retries_ = 0;
};

}  // namespace detail

/// Runs one pick from Start to Success or Failed, mutating `world` only by
/// excavating a held sample. Deterministic in the state of `rng`.
inline PickReport run_pick(TerrainGrid& world, const PickSystems& sys, const PickLimits& limits, Rng& rng) {
  if (!sys.segmenter) throw std::invalid_argument("run_pick: no segmenter");
  sys.intrinsics.validate();
  sys.workspace.validate();
  sys.planner.validate();
  sys.controller.validate();
  sys.grasp.validate();
  sys.noise.validate();
  return detail::PickMachine(world, sys, limits, rng).run();
}

}  // namespace soilpick
