#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "soilpick/geometry.hpp"
#include "soilpick/image.hpp"
#include "soilpick/rng.hpp"

namespace soilpick {

enum class MaterialClass : std::uint8_t { Soil = 0, Rock = 1, Root = 2, Grass = 3 };

/// Only soil can be sampled; everything else must be avoided.
constexpr bool pickable(MaterialClass m) noexcept { return m == MaterialClass::Soil; }

constexpr std::string_view to_string(MaterialClass m) noexcept {
  switch (m) {
    case MaterialClass::Soil: return "soil";
    case MaterialClass::Rock: return "rock";
    case MaterialClass::Root: return "root";
    case MaterialClass::Grass: return "grass";
  }
  return "unknown";
}

/// Per-channel uniform band: mean ± jitter.
struct AlbedoBand {
  Rgb mean;
  float jitter = 0.0f;

  bool contains(const Rgb& c, float slack = 0.0f) const {
    for (int ch = 0; ch < 3; ++ch)
      if (std::abs(c[ch] - mean[ch]) > jitter + slack) return false;
    return true;
  }

  Rgb sample(Rng& rng) const {
    Rgb c;
    for (int ch = 0; ch < 3; ++ch)
      c[ch] = std::clamp(mean[ch] + static_cast<float>(rng.uniform(-jitter, jitter)), 0.0f, 1.0f);
    return c;
  }
};

struct TerrainConfig {
  double bed_size = 1.016;     // 40 in square
  int cells = 128;             // per side
  double soil_depth = 0.152;   // 6 in
  double surface_z = -0.30;    // nominal soil surface in the arm base frame
  double origin_x = 0.042;     // bed corner in the arm base frame
  double origin_y = -0.508;
  double rock_fraction = 0.0;
  double rock_cluster_radius = 0.06;
  double height_roughness = 0.004;
  double rock_height = 0.015;  // rock protrusion above the soil surface
  AlbedoBand soil_albedo{Rgb{0.45f, 0.30f, 0.18f}, 0.03f};
  AlbedoBand rock_albedo{Rgb{0.62f, 0.62f, 0.60f}, 0.03f};
};

struct RenderConfig {
  Rgb background{0.08f, 0.08f, 0.10f};
  Vec3 light_dir{0.3, 0.2, 1.0};
  double ambient = 0.35;
};

/// 2.5D ground truth: each cell is a vertical column with flat top.
class TerrainGrid {
 public:
  TerrainGrid() = default;
  TerrainGrid(int nx, int ny, double cell_size, double origin_x, double origin_y, double floor_z)
      : nx_(nx), ny_(ny), cell_size_(cell_size), origin_x_(origin_x), origin_y_(origin_y),
        floor_z_(floor_z) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("TerrainGrid: nx, ny must be >= 1");
    if (!(cell_size > 0.0)) throw std::invalid_argument("TerrainGrid: cell_size must be positive");
    const auto n = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
    height_.assign(n, floor_z);
    material_.assign(n, MaterialClass::Soil);
    albedo_.assign(n, Rgb{});
  }

  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  double cell_size() const noexcept { return cell_size_; }
  double cell_area() const noexcept { return cell_size_ * cell_size_; }
  double origin_x() const noexcept { return origin_x_; }
  double origin_y() const noexcept { return origin_y_; }
  /// Bottom of the bed; excavation never digs below it.
  double floor_z() const noexcept { return floor_z_; }
  double max_x() const noexcept { return origin_x_ + nx_ * cell_size_; }
  double max_y() const noexcept { return origin_y_ + ny_ * cell_size_; }
  std::size_t cell_count() const noexcept { return height_.size(); }

  double& height(int i, int j) { return height_[index(i, j)]; }
  double height(int i, int j) const { return height_[index(i, j)]; }
  MaterialClass& material(int i, int j) { return material_[index(i, j)]; }
  MaterialClass material(int i, int j) const { return material_[index(i, j)]; }
  Rgb& albedo(int i, int j) { return albedo_[index(i, j)]; }
  const Rgb& albedo(int i, int j) const { return albedo_[index(i, j)]; }

  const std::vector<double>& heights() const noexcept { return height_; }
  const std::vector<MaterialClass>& materials() const noexcept { return material_; }
  const std::vector<Rgb>& albedos() const noexcept { return albedo_; }

  Vec3 cell_center(int i, int j, double z = 0.0) const {
    return Vec3{origin_x_ + (i + 0.5) * cell_size_, origin_y_ + (j + 0.5) * cell_size_, z};
  }

  /// Cell containing (x, y), if inside the bed.
  std::optional<std::array<int, 2>> cell_at(double x, double y) const {
    const double fx = (x - origin_x_) / cell_size_;
    const double fy = (y - origin_y_) / cell_size_;
    if (!(fx >= 0.0 && fy >= 0.0 && fx <= nx_ && fy <= ny_)) return std::nullopt;
    return std::array<int, 2>{std::min(static_cast<int>(fx), nx_ - 1),
                              std::min(static_cast<int>(fy), ny_ - 1)};
  }

  double max_height() const { return *std::max_element(height_.begin(), height_.end()); }
  double min_height() const { return *std::min_element(height_.begin(), height_.end()); }

  double fraction_of(MaterialClass m) const {
    return static_cast<double>(std::count(material_.begin(), material_.end(), m)) /
           static_cast<double>(material_.size());
  }

  /// Outward surface normal of a cell from central height differences.
  Vec3 normal(int i, int j) const {
    const auto h = [this](int a, int b) {
      return height(std::clamp(a, 0, nx_ - 1), std::clamp(b, 0, ny_ - 1));
    };
    const double dhdx = (h(i + 1, j) - h(i - 1, j)) / (2.0 * cell_size_);
    const double dhdy = (h(i, j + 1) - h(i, j - 1)) / (2.0 * cell_size_);
    return Vec3{-dhdx, -dhdy, 1.0}.normalized();
  }

  friend bool operator==(const TerrainGrid&, const TerrainGrid&) = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(i);
  }

  int nx_ = 0;
  int ny_ = 0;
  double cell_size_ = 0.0;
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  double floor_z_ = 0.0;
  std::vector<double> height_;
  std::vector<MaterialClass> material_;
  std::vector<Rgb> albedo_;
};

/// Synthesizes a soil bed with clustered rocks. Deterministic in `seed`.
/// The rock cell count is round(rock_fraction * cells), painted as discs.
inline TerrainGrid generate_terrain(const TerrainConfig& cfg, std::uint64_t seed) {
  if (!(cfg.bed_size > 0.0) || cfg.cells < 1) throw std::invalid_argument("generate_terrain: non-positive dims");
  if (!(cfg.rock_fraction >= 0.0 && cfg.rock_fraction <= 1.0))
    throw std::invalid_argument("generate_terrain: rock_fraction must lie in [0, 1]");
  if (cfg.soil_depth < 0.0 || cfg.height_roughness < 0.0 || cfg.rock_cluster_radius < 0.0)
    throw std::invalid_argument("generate_terrain: negative length parameter");

  Rng rng(seed);
  const int n = cfg.cells;
  const double cs = cfg.bed_size / n;
  TerrainGrid t(n, n, cs, cfg.origin_x, cfg.origin_y, cfg.surface_z - cfg.soil_depth);

  // Smooth relief: bilinear value noise on a lattice of 8-cell spacing.
  constexpr int kLattice = 8;
  const int ln = n / kLattice + 2;
  std::vector<double> lattice(static_cast<std::size_t>(ln * ln));
  for (auto& x : lattice) x = rng.uniform(-1.0, 1.0) * cfg.height_roughness;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double gx = static_cast<double>(i) / kLattice;
      const double gy = static_cast<double>(j) / kLattice;
      const int ix = static_cast<int>(gx), iy = static_cast<int>(gy);
      const double fx = gx - ix, fy = gy - iy;
      const auto at = [&](int a, int b) { return lattice[static_cast<std::size_t>(b * ln + a)]; };
      const double z = (1 - fx) * (1 - fy) * at(ix, iy) + fx * (1 - fy) * at(ix + 1, iy) +
                       (1 - fx) * fy * at(ix, iy + 1) + fx * fy * at(ix + 1, iy + 1);
      t.height(i, j) = cfg.surface_z + z;
    }
  }

  // Rock clusters.
  const auto total = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  const auto target = static_cast<std::size_t>(std::llround(cfg.rock_fraction * static_cast<double>(total)));
  std::vector<double> dome(total, -1.0);
  std::size_t painted = 0;
  struct Offset {
    double dist;
    int di, dj;
  };
  while (painted < target) {
    // Seed the cluster on a uniformly chosen soil cell so each pass makes progress.
    std::uint64_t k = rng.below(total - painted);
    int ci = 0, cj = 0;
    for (std::size_t idx = 0; idx < total; ++idx) {
      if (t.materials()[idx] == MaterialClass::Soil) {
        if (k == 0) {
          ci = static_cast<int>(idx % static_cast<std::size_t>(n));
          cj = static_cast<int>(idx / static_cast<std::size_t>(n));
          break;
        }
        --k;
      }
    }
    const double radius = std::max(0.5, cfg.rock_cluster_radius / cs * rng.uniform(0.6, 1.4));
    const int reach = static_cast<int>(std::ceil(radius));
    std::vector<Offset> disc;
    for (int dj = -reach; dj <= reach; ++dj)
      for (int di = -reach; di <= reach; ++di) {
        const double d = std::hypot(di, dj);
        if (d <= radius) disc.push_back({d, di, dj});
      }
    std::stable_sort(disc.begin(), disc.end(),
                     [](const Offset& a, const Offset& b) { return a.dist < b.dist; });
    for (const auto& o : disc) {
      const int i = ci + o.di, j = cj + o.dj;
      if (i < 0 || j < 0 || i >= n || j >= n) continue;
      const auto idx = static_cast<std::size_t>(j) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i);
      const double profile = std::sqrt(std::max(0.0, 1.0 - (o.dist / radius) * (o.dist / radius)));
      if (t.material(i, j) == MaterialClass::Rock) {
        dome[idx] = std::max(dome[idx], profile);
        continue;
      }
      if (painted >= target) break;
      t.material(i, j) = MaterialClass::Rock;
      dome[idx] = profile;
      ++painted;
    }
  }

  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(j) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i);
      if (t.material(i, j) == MaterialClass::Rock) {
        t.height(i, j) += cfg.rock_height * (0.3 + 0.7 * dome[idx]);
        t.albedo(i, j) = cfg.rock_albedo.sample(rng);
      } else {
        t.albedo(i, j) = cfg.soil_albedo.sample(rng);
      }
    }
  }
  return t;
}

struct RayHit {
  double range = 0.0;  // distance along the unit ray
  int i = 0;
  int j = 0;
  Vec3 point;
};

/// Casts a ray against the height field. Marches at quarter-cell steps and
/// refines the first crossing by bisection to ~1e-10 m. Rays that never meet
/// the bed return nullopt.
struct HeightBounds {
  double lo = 0.0;
  double hi = 0.0;
  explicit HeightBounds(const TerrainGrid& t) : lo(t.min_height()), hi(t.max_height()) {}
};

inline std::optional<RayHit> cast_ray(const TerrainGrid& t, const HeightBounds& hb, const Vec3& origin,
                                      const Vec3& direction) {
  const Vec3 dir = direction.normalized();
  const std::array<double, 3> lo{t.origin_x(), t.origin_y(), hb.lo - 1.0};
  const std::array<double, 3> hi{t.max_x(), t.max_y(), hb.hi};

  double t_enter = 0.0;
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return std::nullopt;
      continue;
    }
    double t0 = (lo[a] - origin[a]) / dir[a];
    double t1 = (hi[a] - origin[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit) return std::nullopt;

  const auto below = [&](double s, std::array<int, 2>* cell) {
    const Vec3 p = origin + s * dir;
    const auto c = t.cell_at(p.x(), p.y());
    if (!c) return false;
    if (cell) *cell = *c;
    return p.z() <= t.height((*c)[0], (*c)[1]);
  };

  const double step = t.cell_size() / 4.0;
  std::array<int, 2> cell{};
  if (below(t_enter, &cell)) {
    return RayHit{t_enter, cell[0], cell[1], origin + t_enter * dir};
  }
  double prev = t_enter;
  while (prev < t_exit) {
    const double next = std::min(prev + step, t_exit);
    if (below(next, nullptr)) {
      double a = prev, b = next;
      while (b - a > 1e-10) {
        const double m = 0.5 * (a + b);
        if (below(m, nullptr)) b = m; else a = m;
      }
      below(b, &cell);
      return RayHit{b, cell[0], cell[1], origin + b * dir};
    }
    prev = next;
  }
  return std::nullopt;
}

inline std::optional<RayHit> cast_ray(const TerrainGrid& t, const Vec3& origin, const Vec3& direction) {
  return cast_ray(t, HeightBounds(t), origin, direction);
}

/// One camera exposure: color, exact pickable labels, and optical-axis depth,
/// all from the same per-pixel ray.
struct Frame {
  RgbImage rgb;
  Mask truth;
  DepthImage depth;
};

inline Rgb shade(const TerrainGrid& t, int i, int j, const RenderConfig& rc) {
  const double lambert = std::max(0.0, t.normal(i, j).dot(rc.light_dir.normalized()));
  const auto s = static_cast<float>(rc.ambient + (1.0 - rc.ambient) * lambert);
  const Rgb& a = t.albedo(i, j);
  return Rgb{a.r * s, a.g * s, a.b * s};
}

/// Renders through a pinhole camera whose pose maps camera coordinates into
/// the terrain (arm base) frame. Pixel centers sit at integer (u, v).
inline Frame render_frame(const TerrainGrid& t, const Pose& cam, const CameraIntrinsics& k,
                          const RenderConfig& rc = {}) {
  k.validate();
  Frame f{RgbImage(k.width, k.height, rc.background), Mask(k.width, k.height, 0),
          DepthImage(k.width, k.height, std::numeric_limits<double>::quiet_NaN())};
  const Vec3 origin = cam.translation();
  const HeightBounds hb(t);
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 ray_cam = pixel_ray(k, u, v);
      const auto hit = cast_ray(t, hb, origin, transform_direction(cam, ray_cam));
      if (!hit) continue;
      f.rgb(u, v) = shade(t, hit->i, hit->j, rc);
      f.truth(u, v) = pickable(t.material(hit->i, hit->j)) ? 1 : 0;
      f.depth(u, v) = hit->range * ray_cam.z();
    }
  }
  return f;
}

inline RgbImage render_rgb(const TerrainGrid& t, const Pose& cam, const CameraIntrinsics& k,
                           const RenderConfig& rc = {}) {
  return render_frame(t, cam, k, rc).rgb;
}

inline Mask ground_truth_mask(const TerrainGrid& t, const Pose& cam, const CameraIntrinsics& k) {
  return render_frame(t, cam, k).truth;
}

struct DepthNoiseModel {
  double sigma0 = 0.003;
  double sigma_slope = 0.005;
  double rock_bias = -0.004;

  void validate() const {
    if (!(sigma0 >= 0.0) || !(sigma_slope >= 0.0))
      throw std::invalid_argument("DepthNoiseModel: standard deviations must be non-negative");
  }

  static DepthNoiseModel noiseless() { return {0.0, 0.0, 0.0}; }
};

/// Single-beam infrared range along the sensor's +Z axis. nullopt means no
/// return (the beam missed the bed).
inline std::optional<double> ir_depth_reading(const TerrainGrid& t, const Pose& sensor,
                                              const DepthNoiseModel& noise, Rng& rng) {
  const auto hit = cast_ray(t, sensor.translation(), transform_direction(sensor, Vec3::UnitZ()));
  if (!hit) return std::nullopt;
  const double sigma = noise.sigma0 + noise.sigma_slope * hit->range;
  double r = hit->range + (sigma > 0.0 ? rng.normal(0.0, sigma) : 0.0);
  if (t.material(hit->i, hit->j) == MaterialClass::Rock) r += noise.rock_bias;
  return std::max(0.0, r);
}

/// Lowers every soil cell whose center lies within `radius` of (x, y) by up to
/// `depth`, never below the bed floor. Returns the removed volume in m^3.
inline double excavate(TerrainGrid& t, double x, double y, double radius, double depth) {
  if (!(radius > 0.0) || !(depth > 0.0)) return 0.0;
  double removed = 0.0;
  const int i0 = std::max(0, static_cast<int>(std::floor((x - radius - t.origin_x()) / t.cell_size())));
  const int i1 = std::min(t.nx() - 1, static_cast<int>(std::floor((x + radius - t.origin_x()) / t.cell_size())));
  const int j0 = std::max(0, static_cast<int>(std::floor((y - radius - t.origin_y()) / t.cell_size())));
  const int j1 = std::min(t.ny() - 1, static_cast<int>(std::floor((y + radius - t.origin_y()) / t.cell_size())));
  for (int j = j0; j <= j1; ++j) {
    for (int i = i0; i <= i1; ++i) {
      if (!pickable(t.material(i, j))) continue;
      const Vec3 c = t.cell_center(i, j);
      if (std::hypot(c.x() - x, c.y() - y) > radius) continue;
      const double h = t.height(i, j);
      const double nh = std::max(h - depth, t.floor_z());
      if (nh < h) {
        removed += (h - nh) * t.cell_area();
        t.height(i, j) = nh;
      }
    }
  }
  return removed;
}

}  // namespace soilpick
