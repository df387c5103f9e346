#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "soilpick/control.hpp"
#include "soilpick/geometry.hpp"
#include "soilpick/terrain.hpp"
#include "soilpick/vision.hpp"

namespace soilpick {

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct CameraConfig {
  double hfov = deg_to_rad(69.0);
  int width = 512;
  int height = 512;
  Pose capture_pose{looking_down(), Vec3{0.55, 0.0, 0.45}};
  Pose hand_eye = Pose::translation(Vec3{0.0, 0.05, 0.0});

  CameraIntrinsics intrinsics() const { return intrinsics_from_fov(hfov, width, height); }
};

/// Synthetic stand-in for the hand-labelled image set: top-down frames of
/// random beds from random camera heights, with exact masks.
struct DatasetConfig {
  int count = 150;
  int native_width = 640;
  int native_height = 480;
  int size = kModelInputSize;
  double min_camera_height = 0.35;  // above the nominal soil surface
  double max_camera_height = 0.85;
  double min_rock_fraction = 0.1;
  double max_rock_fraction = 0.5;
  std::array<double, 3> ratios{0.7, 0.2, 0.1};
};

struct SegmenterConfig {
  std::string model_path;  // empty: train in-process from `dataset`
  DatasetConfig dataset{12, 512, 512, 512, 0.45, 0.85, 0.1, 0.5, {0.7, 0.2, 0.1}};
  TrainConfig train{200, 4, 0.2, true, 0, 256};
};

struct Scenario {
  std::string name = "default";
  int n_trials = 30;
  std::uint64_t base_seed = 0;
  double confidence = 0.95;
  int workers = 1;

  TerrainConfig terrain;
  CameraConfig camera;
  RenderConfig render;
  DepthNoiseModel noise;
  Workspace workspace{0.9, Vec3::Zero(), {Box{Vec3{-0.25, -0.25, -0.6}, Vec3{0.25, 0.25, -0.02}}}, 0.0};
  PlannerConfig planner;
  ControllerConfig controller;
  GraspModel grasp;
  SelectionConfig selection;
  PickLimits limits;
  SegmenterConfig segmenter;

  PickSystems systems(const Segmenter& seg) const {
    PickSystems s;
    s.segmenter = &seg;
    s.intrinsics = camera.intrinsics();
    s.capture_pose = camera.capture_pose;
    s.hand_eye = camera.hand_eye;
    s.workspace = workspace;
    s.planner = planner;
    s.controller = controller;
    s.grasp = grasp;
    s.noise = noise;
    s.render = render;
    s.selection = selection;
    return s;
  }
};

/// Renders `cfg.count` labelled frames, each of a fresh bed. Deterministic in
/// `seed`.
inline std::vector<LabeledImage> synthesize_dataset(const TerrainConfig& terrain, const RenderConfig& render,
                                                    double hfov, const DatasetConfig& cfg, std::uint64_t seed) {
  std::vector<LabeledImage> out;
  out.reserve(static_cast<std::size_t>(cfg.count));
  const CameraIntrinsics k = intrinsics_from_fov(hfov, cfg.native_width, cfg.native_height);
  for (int n = 0; n < cfg.count; ++n) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(n)));
    TerrainConfig tc = terrain;
    tc.rock_fraction = rng.uniform(cfg.min_rock_fraction, cfg.max_rock_fraction);
    const TerrainGrid world = generate_terrain(tc, rng.bits());
    const double cx = world.origin_x() + world.cell_size() * world.nx() * rng.uniform(0.3, 0.7);
    const double cy = world.origin_y() + world.cell_size() * world.ny() * rng.uniform(0.3, 0.7);
    const double cz = terrain.surface_z + rng.uniform(cfg.min_camera_height, cfg.max_camera_height);
    const Pose cam = compose(Pose(looking_down(), Vec3{cx, cy, cz}), Pose::rot_z(rng.uniform(0.0, 2.0 * std::numbers::pi)));
    Frame f = render_frame(world, cam, k, render);
    out.push_back(resize(LabeledImage{std::move(f.rgb), std::move(f.truth)}, cfg.size, cfg.size));
  }
  return out;
}

inline DatasetSplit synthesize_split(const Scenario& s, std::uint64_t seed) {
  return split_dataset(synthesize_dataset(s.terrain, s.render, s.camera.hfov, s.segmenter.dataset, derive_seed(seed, 0)),
                       s.segmenter.dataset.ratios, derive_seed(seed, 1));
}

}  // namespace soilpick
