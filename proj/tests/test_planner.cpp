#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "soilpick/planner.hpp"
#include "soilpick/rng.hpp"

using namespace soilpick;

namespace {

Workspace open_space() { return Workspace{0.9, Vec3::Zero(), {}, 0.0}; }

Workspace cluttered() {
  Workspace w{0.9, Vec3::Zero(), {}, -0.6};
  w.static_obstacles.push_back(Box{Vec3{-0.25, -0.25, -0.6}, Vec3{0.25, 0.25, -0.02}});
  w.static_obstacles.push_back(Box{Vec3{0.1, 0.3, -0.2}, Vec3{0.3, 0.35, 0.4}});
  return w;
}

Vec3 random_point(Rng& rng, double r) { return Vec3{rng.uniform(-r, r), rng.uniform(-r, r), rng.uniform(-r, r)}; }

void expect_valid_tree(const PlanResult& r, const Workspace& w) {
  ASSERT_FALSE(r.tree.empty());
  EXPECT_EQ(r.tree[0].parent, -1);
  EXPECT_EQ(r.tree[0].cost, 0.0);
  for (std::size_t i = 1; i < r.tree.size(); ++i) {
    const auto& n = r.tree[i];
    ASSERT_GE(n.parent, 0);
    const auto& p = r.tree[static_cast<std::size_t>(n.parent)];
    EXPECT_NEAR(n.cost, p.cost + (n.position - p.position).norm(), 1e-9);
    EXPECT_TRUE(reachable(n.position, w));
    EXPECT_FALSE(segment_collides(p.position, n.position, w));
    EXPECT_EQ(std::count(p.children.begin(), p.children.end(), static_cast<int>(i)), 1);
  }
}

}  // namespace

TEST(Reachable, Examples) {
  const Workspace w = cluttered();
  EXPECT_TRUE(reachable(Vec3{0.5, 0.0, 0.3}, w));
  EXPECT_FALSE(reachable(Vec3{1.0, 0.0, 0.0}, w));
  EXPECT_FALSE(reachable(Vec3{0.0, 0.0, -0.3}, w));
  EXPECT_FALSE(reachable(Vec3{0.2, 0.32, 0.0}, w));
  EXPECT_FALSE(reachable(Vec3{0.5, 0.0, -0.7}, w));
}

TEST(SegmentCollides, Examples) {
  const Workspace w = cluttered();
  EXPECT_FALSE(segment_collides(Vec3{0.5, 0.0, 0.3}, Vec3{0.5, 0.2, 0.3}, w));
  EXPECT_TRUE(segment_collides(Vec3{0.4, 0.0, -0.1}, Vec3{-0.4, 0.0, -0.1}, w));
  EXPECT_TRUE(segment_collides(Vec3{0.5, 0.0, 0.3}, Vec3{1.5, 0.0, 0.3}, w));
}

TEST(SegmentCollides, MatchesDenseSamplingProperty) {
  const Workspace w = cluttered();
  Rng rng(41);
  int disagree = 0;
  for (int n = 0; n < 1000; ++n) {
    const Vec3 a = random_point(rng, 0.8), b = random_point(rng, 0.8);
    const bool exact = segment_collides(a, b, w);
    const bool dense = oracle::dense_segment_collides(a, b, w);
    if (exact == dense) continue;
    ++disagree;
    // Sampling can only miss a corner clip, never invent a hit.
    EXPECT_TRUE(exact);
    EXPECT_TRUE(oracle::dense_segment_collides(a, b, w, 1e-6));
  }
  EXPECT_LE(disagree, 5);
}

TEST(Planner, StraightLineNearOptimal) {
  const Workspace w = open_space();
  const auto p = plan_rrt_star(Vec3{0.3, 0, 0.4}, Vec3{-0.3, 0, 0.4}, w, PlannerConfig{});
  EXPECT_LE(p.cost, 1.05 * 0.6);
  EXPECT_EQ(p.waypoints.front(), Vec3(0.3, 0, 0.4));
  EXPECT_EQ(p.waypoints.back(), Vec3(-0.3, 0, 0.4));
}

TEST(Planner, UnreachableEndpoint) {
  try {
    plan_rrt_star(Vec3{0.3, 0, 0.4}, Vec3{2.0, 0, 0.4}, open_space(), PlannerConfig{});
    FAIL() << "expected PlanningError";
  } catch (const PlanningError& e) {
    EXPECT_EQ(e.kind(), PlanErrorKind::UnreachableEndpoint);
  }
  EXPECT_THROW(plan_rrt_star(Vec3{0.0, 0, -0.1}, Vec3{0.3, 0, 0.4}, open_space(), PlannerConfig{}), PlanningError);
}

TEST(Planner, WallGivesNoPath) {
  Workspace w{0.9, Vec3::Zero(), {Box{Vec3{-0.05, -1, -1}, Vec3{0.05, 1, 1}}}, -1.0};
  PlannerConfig cfg;
  cfg.max_iterations = 500;
  try {
    plan_rrt_star(Vec3{0.3, 0, 0.4}, Vec3{-0.3, 0, 0.4}, w, cfg);
    FAIL() << "expected PlanningError";
  } catch (const PlanningError& e) {
    EXPECT_EQ(e.kind(), PlanErrorKind::NoPathFound);
  }
}

TEST(Planner, RejectsBadConfig) {
  PlannerConfig cfg;
  cfg.step_size = 0.0;
  EXPECT_THROW(plan_rrt_star(Vec3{0.3, 0, 0.4}, Vec3{0.4, 0, 0.4}, open_space(), cfg), std::invalid_argument);
}

TEST(Planner, PathTreeAndCurveInvariantsProperty) {
  const Workspace w = cluttered();
  Rng rng(42);
  int planned = 0;
  for (int n = 0; n < 20; ++n) {
    Vec3 a, b;
    do a = random_point(rng, 0.7);
    while (!reachable(a, w));
    do b = random_point(rng, 0.7);
    while (!reachable(b, w));
    PlannerConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(n);
    cfg.max_iterations = 1500;
    PlanResult r;
    try {
      r = plan_rrt_star_detailed(a, b, w, cfg);
    } catch (const PlanningError& e) {
      EXPECT_EQ(e.kind(), PlanErrorKind::NoPathFound);
      continue;
    }
    ++planned;
    EXPECT_EQ(r.path.waypoints.front(), a);
    EXPECT_EQ(r.path.waypoints.back(), b);
    EXPECT_NEAR(r.path.cost, path_length(r.path.waypoints), 1e-12);
    EXPECT_GE(r.path.cost, (b - a).norm() - 1e-12);
    for (std::size_t i = 1; i < r.path.waypoints.size(); ++i)
      EXPECT_FALSE(segment_collides(r.path.waypoints[i - 1], r.path.waypoints[i], w));
    EXPECT_EQ(r.cost_curve.size(), 15u);
    for (std::size_t i = 1; i < r.cost_curve.size(); ++i) EXPECT_LE(r.cost_curve[i], r.cost_curve[i - 1]);
    EXPECT_NEAR(r.cost_curve.back(), r.path.cost, 1e-9);
    expect_valid_tree(r, w);
  }
  EXPECT_GE(planned, 15);
}

TEST(Planner, DeterministicForSeed) {
  const Workspace w = cluttered();
  PlannerConfig cfg;
  cfg.seed = 9;
  const auto a = plan_rrt_star(Vec3{0.5, -0.3, 0.2}, Vec3{0.3, 0.5, 0.1}, w, cfg);
  const auto b = plan_rrt_star(Vec3{0.5, -0.3, 0.2}, Vec3{0.3, 0.5, 0.1}, w, cfg);
  EXPECT_EQ(a.waypoints, b.waypoints);
  EXPECT_EQ(a.cost, b.cost);
}
