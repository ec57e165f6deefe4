#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "safelayer/policy.hpp"

using namespace safelayer;
using Eigen::Vector2d;

namespace {

Vector2d mirror(const Vector2d& v) { return Vector2d(v.x(), -v.y()); }

}  // namespace

TEST(ScriptedHit, CenterlineStrokeIsSymmetric) {
  const ScriptedHitParams p;
  const auto actions = policy_scripted_hit(Vector2d(0.45, 0.0), Vector2d(0.65, 0.0), p, 60);
  ASSERT_EQ(actions.size(), 60u);
  for (const auto& a : actions) EXPECT_NEAR(a.y(), 0.0, 1e-15);
  double peak = 0.0;
  for (const auto& a : actions) peak = std::max(peak, a.x());
  EXPECT_GT(peak, 0.9 * p.hit_speed);
}

TEST(ScriptedHit, MirroredPuckMirrorsStream) {
  const ScriptedHitParams p;
  const auto a = policy_scripted_hit(Vector2d(0.45, 0.05), Vector2d(0.65, 0.12), p, 60);
  const auto b = policy_scripted_hit(Vector2d(0.45, -0.05), Vector2d(0.65, -0.12), p, 60);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE((mirror(a[i]) - b[i]).norm(), 1e-12);
}

TEST(ScriptedHit, ReachesHitSpeedAtStrikePoint) {
  ScriptedHitParams p;
  for (double y : {-0.15, 0.0, 0.1}) {
    const Vector2d start(0.45, 0.0), puck(0.68, y);
    const ScriptedHitPlan plan(start, puck, p);
    ASSERT_FALSE(plan.fallback());
    // Integrate the velocity stream open loop and measure the speed along the
    // strike line when the strike point is crossed.
    Vector2d pos = start;
    bool crossed = false;
    for (long k = 0; k < 200 && !crossed; ++k) {
      const Vector2d v = plan.action(k);
      const Vector2d next = pos + v * p.action_period;
      const double s0 = (pos - plan.strike_point()).dot(plan.direction());
      const double s1 = (next - plan.strike_point()).dot(plan.direction());
      if (s0 < 0.0 && s1 >= 0.0) {
        crossed = true;
        EXPECT_NEAR(v.dot(plan.direction()), p.hit_speed, 0.05 * p.hit_speed);
        // The stroke is aimed at the strike point.
        const Vector2d at = pos + (next - pos) * (-s0 / (s1 - s0));
        EXPECT_LE((at - plan.strike_point()).norm(), 1e-9);
      }
      pos = next;
    }
    EXPECT_TRUE(crossed);
    EXPECT_EQ(plan.action(plan.active_actions() + 5), Vector2d::Zero());
  }
}

TEST(ScriptedHit, UnreachableStrikeFallsBack) {
  ScriptedHitParams p;
  p.reach_min = Vector2d(0.3, -0.4);
  p.reach_max = Vector2d(0.62, 0.4);  // run-up point lies beyond the rectangle edge
  const ScriptedHitPlan plan(Vector2d(0.45, 0.0), Vector2d(0.3, 0.35), p);
  EXPECT_TRUE(plan.fallback());
  const Vector2d a = plan.action(0);
  EXPECT_GT(a.norm(), 0.0);
  EXPECT_GT(a.dot(Vector2d(0.3, 0.35) - Vector2d(0.45, 0.0)), 0.0);
}

TEST(ScriptedHitPolicy, GoalAndDeterministicNoise) {
  ScriptedHitPolicy a(Vector2d(0.65, 0.05), ScriptedHitParams{}, 0.5, 42);
  ScriptedHitPolicy b(Vector2d(0.65, 0.05), ScriptedHitParams{}, 0.5, 42);
  const Observation obs{0.0, Vector::Zero(7), Vector3(0.45, 0.0, 0.15)};
  const auto ca = a.next_chunk(obs, 16);
  const auto cb = b.next_chunk(obs, 16);
  ASSERT_EQ(ca.size(), 16u);
  for (std::size_t i = 0; i < ca.size(); ++i) EXPECT_EQ(ca[i], cb[i]);
  const auto goal = a.goal();
  ASSERT_TRUE(goal.has_value());
  EXPECT_EQ(goal->kind, TaskGoal::Kind::strike);
  EXPECT_DOUBLE_EQ(goal->target.z(), 0.15);
  EXPECT_NEAR(goal->direction.norm(), 1.0, 1e-12);
}

TEST(RandomPolicy, SeededBoundedAndUnbiased) {
  const Vector lo = Vector::Constant(3, -1.0), hi = Vector::Constant(3, 1.0);
  EXPECT_EQ(policy_random(lo, hi, 7, 50), policy_random(lo, hi, 7, 50));
  for (const auto& a : policy_random(Vector::Zero(3), Vector::Zero(3), 1, 20)) {
    EXPECT_EQ(a, Vector::Zero(3));
  }
  const long n = 100000;
  const auto draws = policy_random(lo, hi, 123, n);
  Vector mean = Vector::Zero(3);
  for (const auto& a : draws) {
    EXPECT_TRUE((a.array() >= -1.0).all() && (a.array() <= 1.0).all());
    mean += a;
  }
  mean /= static_cast<double>(n);
  const double sigma = (2.0 / std::sqrt(12.0)) / std::sqrt(static_cast<double>(n));
  EXPECT_LE(mean.cwiseAbs().maxCoeff(), 3.0 * sigma);
}

TEST(ScriptedReach, ChunkHeadsTowardTarget) {
  ScriptedReachParams p;
  p.target = Vector2d(0.8, 0.1);
  ScriptedReachPolicy pol(p, 0.0, 3);
  const Observation obs{0.0, Vector::Zero(3), Vector3(0.4, -0.3, 0.0)};
  const auto chunk = pol.next_chunk(obs, 32);
  ASSERT_EQ(chunk.size(), 32u);
  Vector2d pos(0.4, -0.3);
  for (const auto& a : chunk) {
    EXPECT_LE(a.norm(), p.max_speed + 1e-12);
    pos += a * p.action_period;
  }
  EXPECT_LT((pos - p.target).norm(), (Vector2d(0.4, -0.3) - p.target).norm() * 0.2);
  EXPECT_EQ(pol.goal()->kind, TaskGoal::Kind::reach);
}

TEST(ActionStreamIo, RoundTripEmptyAndMalformed) {
  const auto dir = oracle::temp_dir("actions");
  ActionStream s;
  s.space = ActionSpace::task;
  s.dim = 2;
  s.goal = TaskGoal{TaskGoal::Kind::strike, Vector3(0.6, 0.1, 0.15), Vector3(1, 0, 0), 1.0};
  for (int i = 0; i < 5; ++i) s.actions.push_back({0.08 * i, Vector2d(0.1 * i, 1.0 / 3.0)});
  write_action_stream(s, dir / "a.jsonl");
  const ActionStream r = read_action_stream(dir / "a.jsonl");
  EXPECT_EQ(r.space, s.space);
  EXPECT_EQ(r.dim, 2);
  EXPECT_EQ(r.goal, s.goal);
  ASSERT_EQ(r.actions.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(r.actions[i].t, s.actions[i].t);
    EXPECT_EQ(r.actions[i].action, s.actions[i].action);
  }

  std::ofstream(dir / "empty.jsonl").close();
  EXPECT_TRUE(read_action_stream(dir / "empty.jsonl").actions.empty());
  ReplayPolicy empty(read_action_stream(dir / "empty.jsonl"));
  EXPECT_TRUE(empty.next_chunk(Observation{}, 8).empty());

  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << oracle::slurp(dir / "a.jsonl").substr(0, oracle::slurp(dir / "a.jsonl").find('\n') + 1);
    bad << "{\"t\": 0.0, \"a\": [1.0, 2.0]}\n{\"t\": oops}\n";
  }
  try {
    read_action_stream(dir / "bad.jsonl");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 3);
  }
}

TEST(ReplayPolicy, ChunksUntilStreamEnds) {
  ActionStream s;
  s.dim = 1;
  for (int i = 0; i < 10; ++i) s.actions.push_back({0.1 * i, Vector::Constant(1, i)});
  ReplayPolicy pol(s);
  EXPECT_EQ(pol.next_chunk(Observation{}, 4).size(), 4u);
  EXPECT_EQ(pol.next_chunk(Observation{}, 4).size(), 4u);
  const auto last = pol.next_chunk(Observation{}, 4);
  ASSERT_EQ(last.size(), 2u);
  EXPECT_EQ(last[1][0], 9.0);
  EXPECT_TRUE(pol.next_chunk(Observation{}, 4).empty());
}
