#pragma once

// Shared test setups: a colour-threshold segmenter that needs no training and
// a reduced-resolution scenario.

#include <vector>

#include "soilpick/rng.hpp"
#include "soilpick/scenario.hpp"

namespace fixture {

using namespace soilpick;

/// Soil is reddish-brown, rock and background are grey; shading scales all
/// channels equally so the red/green ratio separates them.
class ChromaSegmenter final : public Segmenter {
 public:
  Mask segment(const RgbImage& img) const override {
    Mask m(img.width(), img.height());
    for (int v = 0; v < img.height(); ++v)
      for (int u = 0; u < img.width(); ++u) m(u, v) = img(u, v).r > 1.2f * img(u, v).g ? 1 : 0;
    return m;
  }
};

/// 128x128 frames with the selection thresholds scaled to match.
inline Scenario small_scenario(double rock_fraction) {
  Scenario s;
  s.name = "small";
  s.terrain.rock_fraction = rock_fraction;
  s.camera.width = 128;
  s.camera.height = 128;
  s.selection.min_area = 13;
  s.selection.footprint_radius_px = 1;
  return s;
}

inline Scenario noiseless(Scenario s) {
  s.noise = DepthNoiseModel::noiseless();
  s.grasp.retention_prob = 1.0;
  s.grasp.deadlock_prob_per_plan = 0.0;
  return s;
}

/// Random masks from a thresholded box-blurred noise field, so components
/// have holes, thin necks and diagonal contacts.
inline Mask random_blobs(int n, Rng& rng) {
  std::vector<double> noise(static_cast<std::size_t>(n * n));
  for (auto& x : noise) x = rng.uniform(0, 1);
  const double thr = rng.uniform(0.45, 0.55);
  Mask m(n, n);
  for (int v = 0; v < n; ++v)
    for (int u = 0; u < n; ++u) {
      double s = 0;
      int c = 0;
      for (int dv = -1; dv <= 1; ++dv)
        for (int du = -1; du <= 1; ++du) {
          const int a = u + du, b = v + dv;
          if (a < 0 || b < 0 || a >= n || b >= n) continue;
          s += noise[static_cast<std::size_t>(b * n + a)];
          ++c;
        }
      m(u, v) = s / c > thr ? 1 : 0;
    }
  return m;
}

inline Pose random_pose(Rng& rng) {
  return Pose::from_rpy(rng.uniform(-3.0, 3.0), rng.uniform(-1.5, 1.5), rng.uniform(-3.0, 3.0),
                        Vec3{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
}

}  // namespace fixture
