#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "soilpick/geometry.hpp"
#include "soilpick/image.hpp"

namespace soilpick {

struct PixelPoint {
  int u = 0;  // column
  int v = 0;  // row
  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

/// Closed outer boundary, counter-clockwise as displayed (v grows downward).
using Contour = std::vector<PixelPoint>;

struct Region {
  Contour contour;
  std::size_t area = 0;
  double centroid_u = 0.0;
  double centroid_v = 0.0;
  PixelPoint origin;            // first pixel of the component in raster order
  bool centroid_inside = true;  // nearest pixel to the centroid is in the component
};

namespace detail {

// 8-neighbourhood, clockwise as displayed, starting at "right".
inline constexpr std::array<int, 8> kDi{0, 1, 1, 1, 0, -1, -1, -1};
inline constexpr std::array<int, 8> kDj{1, 1, 0, -1, -1, -1, 0, 1};

inline int direction_of(int di, int dj) {
  for (int d = 0; d < 8; ++d)
    if (kDi[d] == di && kDj[d] == dj) return d;
  throw std::logic_error("direction_of: not a neighbour");
}

/// Zero-framed working copy for border following. Values: 0 background,
/// 1 unvisited foreground, +/-k labelled by border k.
class BorderImage {
 public:
  explicit BorderImage(const Mask& m) : w_(m.width() + 2), h_(m.height() + 2), f_(static_cast<std::size_t>(w_ * h_), 0) {
    for (int v = 0; v < m.height(); ++v)
      for (int u = 0; u < m.width(); ++u) at(v + 1, u + 1) = m(u, v) ? 1 : 0;
  }
  int& at(int i, int j) { return f_[static_cast<std::size_t>(i * w_ + j)]; }
  int at(int i, int j) const { return f_[static_cast<std::size_t>(i * w_ + j)]; }

 private:
  int w_, h_;
  std::vector<int> f_;
};

/// Follows one border starting at (i, j) with the known zero neighbour
/// (i2, j2), labelling visited pixels with +/-nbd. Returns the border in
/// padded (row, col) coordinates.
inline std::vector<std::array<int, 2>> follow_border(BorderImage& f, int i, int j, int i2, int j2, int nbd) {
  std::vector<std::array<int, 2>> border;
  // Clockwise search from (i2, j2) for the first nonzero neighbour.
  const int start = direction_of(i2 - i, j2 - j);
  int d1 = -1;
  for (int k = 0; k < 8; ++k) {
    const int d = (start + k) % 8;
    if (f.at(i + kDi[d], j + kDj[d]) != 0) {
      d1 = d;
      break;
    }
  }
  if (d1 < 0) {
    f.at(i, j) = -nbd;
    border.push_back({i, j});
    return border;
  }
  const int i1 = i + kDi[d1], j1 = j + kDj[d1];
  int pi = i1, pj = j1;  // (i2, j2)
  int ci = i, cj = j;    // (i3, j3)
  while (true) {
    // Counter-clockwise search around (ci, cj), starting just past (pi, pj).
    const int dp = direction_of(pi - ci, pj - cj);
    bool right_zero_examined = false;
    int ni = 0, nj = 0;
    for (int k = 1; k <= 8; ++k) {
      const int d = ((dp - k) % 8 + 8) % 8;
      const int qi = ci + kDi[d], qj = cj + kDj[d];
      if (f.at(qi, qj) != 0) {
        ni = qi;
        nj = qj;
        break;
      }
      if (d == 0) right_zero_examined = true;
    }
    if (right_zero_examined) f.at(ci, cj) = -nbd;
    else if (f.at(ci, cj) == 1) f.at(ci, cj) = nbd;
    border.push_back({ci, cj});
    if (ni == i && nj == j && ci == i1 && cj == j1) break;
    pi = ci;
    pj = cj;
    ci = ni;
    cj = nj;
  }
  return border;
}

}  // namespace detail

/// Regions plus a per-pixel index into `regions` (-1 on background).
struct RegionMap {
  std::vector<Region> regions;
  Image<int> labels;
};

/// One region per 8-connected foreground component (background is
/// 4-connected). Outer borders are traced by raster-scan border following;
/// hole borders are followed too so that every foreground run can be
/// attributed to its component, but only outer contours are returned.
/// Sorted by area descending, ties by raster order of the component origin.
inline RegionMap label_regions(const Mask& mask) {
  detail::BorderImage f(mask);
  struct Acc {
    Region region;
    std::int64_t sum_u = 0, sum_v = 0;
  };
  std::vector<Acc> comps;
  std::vector<int> border_comp{-1, -1};  // indexed by border number; 0 and 1 unused
  Image<int> label(mask.width(), mask.height(), -1);
  int nbd = 1;

  for (int i = 1; i <= mask.height(); ++i) {
    int current = -1;
    for (int j = 1; j <= mask.width(); ++j) {
      const int fij = f.at(i, j);
      if (fij == 0) {
        current = -1;
        continue;
      }
      bool outer_start = false;
      if (f.at(i, j - 1) == 0) {
        if (fij == 1) {
          outer_start = true;
          ++nbd;
          current = static_cast<int>(comps.size());
          border_comp.push_back(current);
          Acc acc;
          acc.region.origin = PixelPoint{j - 1, i - 1};
          for (const auto& p : detail::follow_border(f, i, j, i, j - 1, nbd))
            acc.region.contour.push_back(PixelPoint{p[1] - 1, p[0] - 1});
          comps.push_back(std::move(acc));
        } else {
          current = border_comp[static_cast<std::size_t>(std::abs(fij))];
        }
      }
      if (!outer_start && f.at(i, j) >= 1 && f.at(i, j + 1) == 0) {
        ++nbd;
        border_comp.push_back(current);
        detail::follow_border(f, i, j, i, j + 1, nbd);
      }
      Acc& acc = comps[static_cast<std::size_t>(current)];
      ++acc.region.area;
      acc.sum_u += j - 1;
      acc.sum_v += i - 1;
      label(j - 1, i - 1) = current;
    }
  }

  for (std::size_t c = 0; c < comps.size(); ++c) {
    Acc& acc = comps[c];
    const auto area = static_cast<double>(acc.region.area);
    acc.region.centroid_u = static_cast<double>(acc.sum_u) / area;
    acc.region.centroid_v = static_cast<double>(acc.sum_v) / area;
    const int nu = static_cast<int>(std::lround(acc.region.centroid_u));
    const int nv = static_cast<int>(std::lround(acc.region.centroid_v));
    acc.region.centroid_inside = label(nu, nv) == static_cast<int>(c);
  }
  // Components were discovered in raster order, so stability gives the tie-break.
  std::vector<int> order(comps.size());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = static_cast<int>(c);
  std::stable_sort(order.begin(), order.end(), [&comps](int a, int b) {
    return comps[static_cast<std::size_t>(a)].region.area > comps[static_cast<std::size_t>(b)].region.area;
  });
  std::vector<int> rank(comps.size());
  RegionMap out;
  out.regions.reserve(comps.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    rank[static_cast<std::size_t>(order[r])] = static_cast<int>(r);
    out.regions.push_back(std::move(comps[static_cast<std::size_t>(order[r])].region));
  }
  for (auto& l : label.pixels())
    if (l >= 0) l = rank[static_cast<std::size_t>(l)];
  out.labels = std::move(label);
  return out;
}

inline std::vector<Region> find_regions(const Mask& mask) { return label_regions(mask).regions; }

struct TargetCandidate {
  Vec3 position;  // arm base frame, z = hover height
  std::size_t source_region_area = 0;
  double source_u = 0.0;
  double source_v = 0.0;
  std::size_t region_index = 0;  // index into the region list it came from
  bool centroid_inside = true;
};

/// Back-projects region centroids through the depth image into the arm base
/// frame and replaces z with `hover_height`. Regions smaller than `min_area`
/// or whose centroid pixel has no depth return are dropped.
inline std::vector<TargetCandidate> candidate_targets(const std::vector<Region>& regions, const DepthImage& depth,
                                                      const CameraIntrinsics& k, const Pose& cam_to_base,
                                                      double hover_height, std::size_t min_area) {
  if (depth.width() != k.width || depth.height() != k.height)
    throw std::invalid_argument("candidate_targets: depth image does not match intrinsics");
  std::vector<TargetCandidate> out;
  for (std::size_t r = 0; r < regions.size(); ++r) {
    const Region& region = regions[r];
    if (region.area < min_area) continue;
    const int u = std::clamp(static_cast<int>(std::lround(region.centroid_u)), 0, depth.width() - 1);
    const int v = std::clamp(static_cast<int>(std::lround(region.centroid_v)), 0, depth.height() - 1);
    const double d = depth(u, v);
    if (!(d > 0.0) || !std::isfinite(d)) continue;
    Vec3 p = transform_point(cam_to_base, back_project(k, {region.centroid_u, region.centroid_v, d}));
    p.z() = hover_height;
    out.push_back(TargetCandidate{p, region.area, region.centroid_u, region.centroid_v, r, region.centroid_inside});
  }
  return out;
}

}  // namespace soilpick
