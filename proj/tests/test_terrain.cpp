#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "soilpick/terrain.hpp"

using namespace soilpick;

namespace {

TerrainGrid flat_grid(int n, double cs, double z, MaterialClass m, Rgb albedo) {
  TerrainGrid t(n, n, cs, 0.0, 0.0, z - 0.15);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      t.height(i, j) = z;
      t.material(i, j) = m;
      t.albedo(i, j) = albedo;
    }
  return t;
}

/// Camera 0.3 m above the middle of a 1 m bed at z = 0, narrow enough to see
/// only the bed.
Pose center_camera() { return Pose(looking_down(), Vec3{0.5, 0.5, 0.3}); }

TerrainConfig small_config(double rock_fraction) {
  TerrainConfig c;
  c.cells = 64;
  c.rock_fraction = rock_fraction;
  return c;
}

}  // namespace

TEST(Terrain, NoRocksIsAllSoil) {
  const auto t = generate_terrain(small_config(0.0), 1);
  EXPECT_EQ(t.fraction_of(MaterialClass::Soil), 1.0);
}

TEST(Terrain, FullRockIsAllRock) {
  const auto t = generate_terrain(small_config(1.0), 1);
  EXPECT_EQ(t.fraction_of(MaterialClass::Rock), 1.0);
}

TEST(Terrain, RockFractionWithinTwoPoints) {
  for (double f : {0.05, 0.3, 0.5, 0.8})
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      TerrainConfig c;
      c.rock_fraction = f;
      EXPECT_NEAR(generate_terrain(c, seed).fraction_of(MaterialClass::Rock), f, 0.02);
    }
}

TEST(Terrain, RocksAreClustered) {
  TerrainConfig c;
  c.rock_fraction = 0.3;
  const auto t = generate_terrain(c, 9);
  std::size_t rock = 0, with_neighbor = 0;
  for (int j = 0; j < t.ny(); ++j)
    for (int i = 0; i < t.nx(); ++i) {
      if (t.material(i, j) != MaterialClass::Rock) continue;
      ++rock;
      bool any = false;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
          const int a = i + di, b = j + dj;
          if ((di || dj) && a >= 0 && b >= 0 && a < t.nx() && b < t.ny() && t.material(a, b) == MaterialClass::Rock)
            any = true;
        }
      with_neighbor += any;
    }
  EXPECT_GT(static_cast<double>(with_neighbor) / static_cast<double>(rock), 0.97);
}

TEST(Terrain, SeedDeterminism) {
  TerrainConfig c;
  c.rock_fraction = 0.3;
  EXPECT_TRUE(generate_terrain(c, 7) == generate_terrain(c, 7));
  EXPECT_FALSE(generate_terrain(c, 7) == generate_terrain(c, 8));
}

TEST(Terrain, AlbedoBandsByClass) {
  TerrainConfig c;
  c.rock_fraction = 0.4;
  const auto t = generate_terrain(c, 2);
  for (int j = 0; j < t.ny(); ++j)
    for (int i = 0; i < t.nx(); ++i) {
      const auto& band = t.material(i, j) == MaterialClass::Rock ? c.rock_albedo : c.soil_albedo;
      EXPECT_TRUE(band.contains(t.albedo(i, j), 1e-6f));
    }
}

TEST(Terrain, RejectsBadConfig) {
  TerrainConfig c;
  c.cells = 0;
  EXPECT_THROW(generate_terrain(c, 0), std::invalid_argument);
  c = TerrainConfig{};
  c.rock_fraction = 1.5;
  EXPECT_THROW(generate_terrain(c, 0), std::invalid_argument);
}

TEST(Render, UniformFlatTerrainIsConstant) {
  const auto t = flat_grid(32, 1.0 / 32, 0.0, MaterialClass::Soil, Rgb{0.4f, 0.3f, 0.2f});
  const auto k = intrinsics_from_fov(1.0, 48, 48);
  const auto img = render_rgb(t, center_camera(), k);
  for (const auto& p : img.pixels()) EXPECT_EQ(p, img(0, 0));
}

TEST(Render, AllRockHasNoSoilColoredPixel) {
  TerrainConfig c = small_config(1.0);
  const auto t = generate_terrain(c, 3);
  const Pose cam(looking_down(), Vec3{c.origin_x + 0.5, c.origin_y + 0.5, c.surface_z + 0.4});
  const auto img = render_rgb(t, cam, intrinsics_from_fov(1.0, 64, 64));
  for (const auto& p : img.pixels()) EXPECT_FALSE(c.soil_albedo.contains(p));
}

TEST(Render, Deterministic) {
  const auto t = generate_terrain(small_config(0.3), 4);
  const Pose cam(looking_down(), Vec3{0.55, 0.0, 0.1});
  const auto k = intrinsics_from_fov(1.2, 64, 64);
  const Frame a = render_frame(t, cam, k), b = render_frame(t, cam, k);
  EXPECT_TRUE(a.rgb == b.rgb);
  EXPECT_TRUE(a.truth == b.truth);
}

TEST(GroundTruth, AllSoilAndAllRock) {
  const auto k = intrinsics_from_fov(1.0, 40, 40);
  const auto soil = flat_grid(32, 1.0 / 32, 0.0, MaterialClass::Soil, Rgb{0.4f, 0.3f, 0.2f});
  const auto rock = flat_grid(32, 1.0 / 32, 0.0, MaterialClass::Rock, Rgb{0.6f, 0.6f, 0.6f});
  EXPECT_EQ(count_ones(ground_truth_mask(soil, center_camera(), k)), 40u * 40u);
  EXPECT_EQ(count_ones(ground_truth_mask(rock, center_camera(), k)), 0u);
}

TEST(GroundTruth, MissedRaysAreBackground) {
  const auto t = flat_grid(8, 0.1 / 8, 0.0, MaterialClass::Soil, Rgb{0.4f, 0.3f, 0.2f});
  const auto k = intrinsics_from_fov(1.5, 32, 32);
  const Frame f = render_frame(t, Pose(looking_down(), Vec3{0.05, 0.05, 0.5}), k);
  EXPECT_EQ(f.truth(0, 0), 0);
  EXPECT_TRUE(std::isnan(f.depth(0, 0)));
  EXPECT_EQ(f.rgb(0, 0), RenderConfig{}.background);
}

TEST(Render, LabelsAgreeWithTheColoredCell) {
  const auto t = generate_terrain(small_config(0.4), 5);
  const Pose cam(looking_down(), Vec3{0.55, 0.0, 0.2});
  const auto k = intrinsics_from_fov(1.2, 48, 48);
  const Frame f = render_frame(t, cam, k);
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      const auto hit = cast_ray(t, cam.translation(), transform_direction(cam, pixel_ray(k, u, v)));
      ASSERT_TRUE(hit.has_value());
      EXPECT_EQ(f.truth(u, v), pickable(t.material(hit->i, hit->j)) ? 1 : 0);
      EXPECT_EQ(f.rgb(u, v), shade(t, hit->i, hit->j, RenderConfig{}));
    }
}

TEST(Render, MaskFractionMatchesVisibleSoilOracle) {
  TerrainConfig c;
  c.rock_fraction = 0.3;
  const auto t = generate_terrain(c, 21);
  const Pose cam(looking_down(), Vec3{0.55, 0.0, 0.45});
  const auto k = intrinsics_from_fov(69.0 * std::numbers::pi / 180.0, 128, 128);
  const Mask m = ground_truth_mask(t, cam, k);
  std::size_t soil = 0;
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      const Vec3 d = transform_direction(cam, pixel_ray(k, u, v));
      const auto r = oracle::column_hit(t, cam.translation(), d);
      if (!r) continue;
      const Vec3 p = cam.translation() + d * (*r + 1e-9);
      const auto cell = t.cell_at(p.x(), p.y());
      if (cell && pickable(t.material((*cell)[0], (*cell)[1]))) ++soil;
    }
  const double n = static_cast<double>(k.width * k.height);
  EXPECT_NEAR(static_cast<double>(count_ones(m)) / n, static_cast<double>(soil) / n, 0.02);
}

TEST(CastRay, AgreesWithExactColumnWalk) {
  TerrainConfig c;
  c.rock_fraction = 0.3;
  c.height_roughness = 0.01;
  const auto t = generate_terrain(c, 13);
  Rng rng(17);
  int agree = 0, total = 0;
  for (int n = 0; n < 2000; ++n) {
    const Vec3 o{rng.uniform(0.1, 1.0), rng.uniform(-0.45, 0.45), rng.uniform(-0.2, 0.5)};
    const Vec3 d = Vec3{rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), -1.0}.normalized();
    const auto hit = cast_ray(t, o, d);
    const auto ref = oracle::column_hit(t, o, d);
    ++total;
    if (hit.has_value() == ref.has_value() && (!hit || std::abs(hit->range - *ref) <= 1e-6)) {
      ++agree;
      continue;
    }
    // Quarter-cell marching can only step over a sliver of a column, so a
    // disagreement must be a later hit, never an earlier one.
    ASSERT_TRUE(ref.has_value());
    if (hit) {
      EXPECT_GT(hit->range, *ref);
    }
  }
  EXPECT_GE(static_cast<double>(agree) / total, 0.99);
}

TEST(IrSensor, NoiselessFlatSoil) {
  const auto t = flat_grid(16, 0.05, 0.0, MaterialClass::Soil, Rgb{0.4f, 0.3f, 0.2f});
  Rng rng(1);
  const auto r = ir_depth_reading(t, Pose(looking_down(), Vec3{0.4, 0.4, 0.5}), DepthNoiseModel::noiseless(), rng);
  ASSERT_TRUE(r.has_value());
  EXPECT_NEAR(*r, 0.5, 1e-9);
}

TEST(IrSensor, NoiseStandardDeviation) {
  const auto t = flat_grid(16, 0.05, 0.0, MaterialClass::Soil, Rgb{0.4f, 0.3f, 0.2f});
  const DepthNoiseModel noise{0.005, 0.0, 0.0};
  Rng rng(2);
  double sum = 0.0, sq = 0.0;
  constexpr int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double r = *ir_depth_reading(t, Pose(looking_down(), Vec3{0.4, 0.4, 0.5}), noise, rng);
    sum += r;
    sq += r * r;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(sd, 0.005, 0.15 * 0.005);
  EXPECT_NEAR(mean, 0.5, 0.0005);
}

TEST(IrSensor, SkyIsNoReturn) {
  const auto t = flat_grid(16, 0.05, 0.0, MaterialClass::Soil, Rgb{});
  Rng rng(3);
  EXPECT_FALSE(ir_depth_reading(t, Pose(Mat3::Identity(), Vec3{0.4, 0.4, 0.5}), DepthNoiseModel{}, rng));
  EXPECT_FALSE(ir_depth_reading(t, Pose(looking_down(), Vec3{5.0, 5.0, 0.5}), DepthNoiseModel{}, rng));
}

TEST(IrSensor, RockBiasAndClamp) {
  const auto t = flat_grid(16, 0.05, 0.0, MaterialClass::Rock, Rgb{});
  Rng rng(4);
  const Pose s(looking_down(), Vec3{0.4, 0.4, 0.5});
  EXPECT_NEAR(*ir_depth_reading(t, s, DepthNoiseModel{0.0, 0.0, -0.004}, rng), 0.496, 1e-9);
  EXPECT_EQ(*ir_depth_reading(t, s, DepthNoiseModel{0.0, 0.0, -2.0}, rng), 0.0);
}

TEST(IrSensor, NoiselessEqualsAnalyticRange) {
  TerrainConfig c;
  c.rock_fraction = 0.3;
  const auto t = generate_terrain(c, 8);
  Rng rng(9), unused(0);
  for (int n = 0; n < 500; ++n) {
    const double x = rng.uniform(t.origin_x() + 1e-3, t.max_x() - 1e-3);
    const double y = rng.uniform(t.origin_y() + 1e-3, t.max_y() - 1e-3);
    const double z = rng.uniform(-0.2, 0.5);
    const auto cell = *t.cell_at(x, y);
    const double expect = z - t.height(cell[0], cell[1]);
    const auto r = ir_depth_reading(t, Pose(looking_down(), Vec3{x, y, z}), DepthNoiseModel::noiseless(), unused);
    ASSERT_TRUE(r.has_value());
    EXPECT_NEAR(*r, expect, 1e-6);
  }
}

TEST(Excavate, ZeroDepthChangesNothing) {
  auto t = generate_terrain(small_config(0.2), 1);
  const auto before = t;
  EXPECT_EQ(excavate(t, 0.5, 0.0, 0.05, 0.0), 0.0);
  EXPECT_TRUE(t == before);
}

TEST(Excavate, RockIsUntouched) {
  auto t = flat_grid(16, 0.05, 0.0, MaterialClass::Rock, Rgb{});
  const auto before = t;
  EXPECT_EQ(excavate(t, 0.4, 0.4, 0.2, 0.03), 0.0);
  EXPECT_TRUE(t == before);
}

TEST(Excavate, FlatSoilVolumeClosedForm) {
  auto t = flat_grid(40, 0.01, 0.0, MaterialClass::Soil, Rgb{});
  const double x = 0.2, y = 0.2, radius = 0.031, depth = 0.02;
  std::size_t k = 0;
  for (int j = 0; j < 40; ++j)
    for (int i = 0; i < 40; ++i) {
      const double cx = (i + 0.5) * 0.01, cy = (j + 0.5) * 0.01;
      if ((cx - x) * (cx - x) + (cy - y) * (cy - y) <= radius * radius) ++k;
    }
  ASSERT_GT(k, 0u);
  EXPECT_NEAR(excavate(t, x, y, radius, depth), static_cast<double>(k) * 1e-4 * depth, 1e-15);
}

TEST(Excavate, NeverRaisesAndNeverTouchesRockProperty) {
  auto t = generate_terrain(small_config(0.4), 6);
  Rng rng(6);
  for (int n = 0; n < 200; ++n) {
    const auto before = t;
    excavate(t, rng.uniform(0.0, 1.1), rng.uniform(-0.55, 0.55), rng.uniform(0.005, 0.1), rng.uniform(0.0, 0.2));
    for (int j = 0; j < t.ny(); ++j)
      for (int i = 0; i < t.nx(); ++i) {
        EXPECT_LE(t.height(i, j), before.height(i, j));
        EXPECT_GE(t.height(i, j), t.floor_z());
        if (t.material(i, j) == MaterialClass::Rock) {
          EXPECT_EQ(t.height(i, j), before.height(i, j));
        }
      }
  }
}
