#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "soilpick/geometry.hpp"
#include "soilpick/rng.hpp"

namespace soilpick {

/// Closed axis-aligned box.
struct Box {
  Vec3 lo;
  Vec3 hi;

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }

  /// Slab test against the segment a -> b.
  bool intersects_segment(const Vec3& a, const Vec3& b) const {
    const Vec3 d = b - a;
    double t0 = 0.0, t1 = 1.0;
    for (int k = 0; k < 3; ++k) {
      if (std::abs(d[k]) < 1e-15) {
        if (a[k] < lo[k] || a[k] > hi[k]) return false;
        continue;
      }
      double ta = (lo[k] - a[k]) / d[k];
      double tb = (hi[k] - a[k]) / d[k];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }
};

struct Workspace {
  double reach_radius = 0.9;
  Vec3 base_position = Vec3::Zero();
  std::vector<Box> static_obstacles;
  double floor_z = 0.0;  // lowest free-flight height

  void validate() const {
    if (!(reach_radius > 0.0)) throw std::invalid_argument("Workspace: reach_radius must be positive");
    for (const auto& b : static_obstacles)
      if (!((b.hi - b.lo).array() > 0.0).all()) throw std::invalid_argument("Workspace: obstacle box has no volume");
  }
};

struct PlannerConfig {
  double step_size = 0.05;
  double rewire_radius_gamma = 2.0;
  double goal_bias = 0.05;
  int max_iterations = 4000;
  double goal_tolerance = 0.01;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(step_size > 0.0)) throw std::invalid_argument("PlannerConfig: step_size must be positive");
    if (!(goal_bias >= 0.0 && goal_bias < 1.0)) throw std::invalid_argument("PlannerConfig: goal_bias must lie in [0, 1)");
    if (max_iterations < 1) throw std::invalid_argument("PlannerConfig: max_iterations must be >= 1");
    if (!(goal_tolerance > 0.0)) throw std::invalid_argument("PlannerConfig: goal_tolerance must be positive");
  }

  /// min(gamma * (log n / n)^(1/3), 4 * step_size)
  double neighbor_radius(std::size_t n) const {
    if (n < 2) return 0.0;
    const double nn = static_cast<double>(n);
    return std::min(rewire_radius_gamma * std::cbrt(std::log(nn) / nn), 4.0 * step_size);
  }
};

struct Path {
  std::vector<Vec3> waypoints;
  double cost = 0.0;
};

inline double path_length(const std::vector<Vec3>& pts) {
  double c = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) c += (pts[i] - pts[i - 1]).norm();
  return c;
}

enum class PlanErrorKind { NoPathFound, UnreachableEndpoint };

inline const char* to_string(PlanErrorKind k) {
  return k == PlanErrorKind::NoPathFound ? "NoPathFound" : "UnreachableEndpoint";
}

class PlanningError : public std::runtime_error {
 public:
  explicit PlanningError(PlanErrorKind kind) : std::runtime_error(to_string(kind)), kind_(kind) {}
  PlanErrorKind kind() const noexcept { return kind_; }

 private:
  PlanErrorKind kind_;
};

inline bool reachable(const Vec3& p, const Workspace& w) {
  if ((p - w.base_position).norm() > w.reach_radius) return false;
  if (p.z() < w.floor_z) return false;
  for (const auto& b : w.static_obstacles)
    if (b.contains(p)) return false;
  return true;
}

/// The reach ball and the half-space above floor_z are convex, so a segment
/// stays inside them iff both endpoints do; boxes use the slab test.
inline bool segment_collides(const Vec3& a, const Vec3& b, const Workspace& w) {
  if ((a - w.base_position).norm() > w.reach_radius || (b - w.base_position).norm() > w.reach_radius) return true;
  if (a.z() < w.floor_z || b.z() < w.floor_z) return true;
  for (const auto& box : w.static_obstacles)
    if (box.intersects_segment(a, b)) return true;
  return false;
}

struct TreeNode {
  Vec3 position;
  int parent = -1;
  double cost = 0.0;
  std::vector<int> children;
};

struct PlanResult {
  Path path;
  std::vector<TreeNode> tree;
  /// Best goal-reaching cost after every 100 iterations (+inf before the
  /// first solution).
  std::vector<double> cost_curve;
};

namespace detail {

class RrtStar {
 public:
  RrtStar(const Vec3& start, const Vec3& goal, const Workspace& w, const PlannerConfig& cfg)
      : goal_(goal), w_(w), cfg_(cfg), rng_(cfg.seed) {
    nodes_.push_back(TreeNode{start, -1, 0.0, {}});
    consider_goal(0);
  }

  PlanResult run() {
    PlanResult out;
    for (int it = 1; it <= cfg_.max_iterations; ++it) {
      iterate();
      if (it % 100 == 0) out.cost_curve.push_back(best_cost());
    }
    best_cost();
    if (best_node_ < 0) throw PlanningError(PlanErrorKind::NoPathFound);
    std::vector<Vec3> pts;
    for (int n = best_node_; n >= 0; n = nodes_[static_cast<std::size_t>(n)].parent)
      pts.push_back(nodes_[static_cast<std::size_t>(n)].position);
    std::reverse(pts.begin(), pts.end());
    if (pts.back() != goal_) pts.push_back(goal_);
    out.path.cost = path_length(pts);
    out.path.waypoints = std::move(pts);
    out.tree = std::move(nodes_);
    return out;
  }

 private:
  Vec3 sample() {
    if (rng_.uniform() < cfg_.goal_bias) return goal_;
    // Uniform over the free part of the reach sphere; falls back to the
    // whole sphere if free space is too small to hit by rejection.
    const double r = w_.reach_radius;
    Vec3 in_sphere = w_.base_position;
    for (int tries = 0; tries < 1000; ++tries) {
      const Vec3 d{rng_.uniform(-r, r), rng_.uniform(-r, r), rng_.uniform(-r, r)};
      if (d.norm() > r) continue;
      in_sphere = w_.base_position + d;
      if (reachable(in_sphere, w_)) break;
    }
    return in_sphere;
  }

  void iterate() {
    const Vec3 target = sample();
    std::size_t nearest = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const double d = (nodes_[i].position - target).squaredNorm();
      if (d < best_d) {
        best_d = d;
        nearest = i;
      }
    }
    const Vec3& from = nodes_[nearest].position;
    const Vec3 delta = target - from;
    const double dist = delta.norm();
    if (dist < 1e-12) return;
    const Vec3 x_new = dist <= cfg_.step_size ? target : Vec3(from + delta * (cfg_.step_size / dist));
    if (!reachable(x_new, w_) || segment_collides(from, x_new, w_)) return;

    const double radius = cfg_.neighbor_radius(nodes_.size() + 1);
    std::vector<std::size_t> near;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if ((nodes_[i].position - x_new).norm() <= radius) near.push_back(i);

    // Choose parent.
    std::size_t parent = nearest;
    double parent_cost = nodes_[nearest].cost + (x_new - from).norm();
    for (std::size_t i : near) {
      if (i == nearest) continue;
      const double c = nodes_[i].cost + (x_new - nodes_[i].position).norm();
      if (c < parent_cost && !segment_collides(nodes_[i].position, x_new, w_)) {
        parent = i;
        parent_cost = c;
      }
    }
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{x_new, static_cast<int>(parent), parent_cost, {}});
    nodes_[parent].children.push_back(id);

    // Rewire.
    for (std::size_t i : near) {
      if (i == parent) continue;
      const double c = parent_cost + (nodes_[i].position - x_new).norm();
      if (c < nodes_[i].cost && !segment_collides(x_new, nodes_[i].position, w_)) {
        auto& siblings = nodes_[static_cast<std::size_t>(nodes_[i].parent)].children;
        siblings.erase(std::find(siblings.begin(), siblings.end(), static_cast<int>(i)));
        nodes_[i].parent = id;
        nodes_[static_cast<std::size_t>(id)].children.push_back(static_cast<int>(i));
        propagate(i, c - nodes_[i].cost);
      }
    }
    consider_goal(static_cast<std::size_t>(id));
  }

  void propagate(std::size_t root, double delta) {
    std::vector<std::size_t> stack{root};
    while (!stack.empty()) {
      const std::size_t n = stack.back();
      stack.pop_back();
      nodes_[n].cost += delta;
      for (int c : nodes_[n].children) stack.push_back(static_cast<std::size_t>(c));
    }
  }

  void consider_goal(std::size_t id) {
    const Vec3& p = nodes_[id].position;
    if ((p - goal_).norm() <= cfg_.goal_tolerance && !segment_collides(p, goal_, w_)) goal_nodes_.push_back(id);
  }

  double goal_cost(std::size_t id) const { return nodes_[id].cost + (nodes_[id].position - goal_).norm(); }

  double best_cost() {
    double best = std::numeric_limits<double>::infinity();
    best_node_ = -1;
    for (std::size_t id : goal_nodes_) {
      const double c = goal_cost(id);
      if (c < best) {
        best = c;
        best_node_ = static_cast<int>(id);
      }
    }
    return best;
  }

  Vec3 goal_;
  const Workspace& w_;
  const PlannerConfig& cfg_;
  Rng rng_;
  std::vector<TreeNode> nodes_;
  std::vector<std::size_t> goal_nodes_;
  int best_node_ = -1;
};

}  // namespace detail

/// RRT* from `start` to `goal`. Runs all max_iterations and returns the
/// cheapest goal-reaching path; the last waypoint is `goal` itself.
inline PlanResult plan_rrt_star_detailed(const Vec3& start, const Vec3& goal, const Workspace& w,
                                         const PlannerConfig& cfg) {
  w.validate();
  cfg.validate();
  if (!reachable(start, w) || !reachable(goal, w)) throw PlanningError(PlanErrorKind::UnreachableEndpoint);
  return detail::RrtStar(start, goal, w, cfg).run();
}

inline Path plan_rrt_star(const Vec3& start, const Vec3& goal, const Workspace& w, const PlannerConfig& cfg) {
  return plan_rrt_star_detailed(start, goal, w, cfg).path;
}

}  // namespace soilpick
