#include <gtest/gtest.h>

#include <random>

#include "disem/environments.hpp"

using namespace disem;

TEST(EnvSpec, Settings) {
  const auto th_a = EnvSpec::make(Task::kTreasureHunt, Setting::kA);
  EXPECT_EQ(th_a.n_agents, 3);
  EXPECT_DOUBLE_EQ(th_a.speed, 0.15);
  EXPECT_EQ(th_a.t_max, 20);
  EXPECT_DOUBLE_EQ(th_a.collect_radius, 0.1);
  const auto th_b = EnvSpec::make(Task::kTreasureHunt, Setting::kB);
  EXPECT_EQ(th_b.n_agents, 6);
  EXPECT_DOUBLE_EQ(th_b.speed, 0.09);
  EXPECT_EQ(th_b.t_max, 60);
  const auto pp_a = EnvSpec::make(Task::kPredatorPrey, Setting::kA);
  EXPECT_EQ(pp_a.n_agents, 3);
  EXPECT_EQ(pp_a.grid, 5);
  EXPECT_EQ(pp_a.t_max, 20);
  EXPECT_EQ(pp_a.vision, 0);
  const auto pp_b = EnvSpec::make(Task::kPredatorPrey, Setting::kB);
  EXPECT_EQ(pp_b.n_agents, 5);
  EXPECT_EQ(pp_b.grid, 10);
  EXPECT_EQ(pp_b.t_max, 40);
  EXPECT_EQ(pp_b.vision, 1);
  const auto tj_a = EnvSpec::make(Task::kTrafficJunction, Setting::kA);
  EXPECT_EQ(tj_a.n_agents, 5);
  EXPECT_DOUBLE_EQ(tj_a.p_arrive, 0.3);
  EXPECT_EQ(tj_a.t_max, 20);
  const auto tj_b = EnvSpec::make(Task::kTrafficJunction, Setting::kB);
  EXPECT_EQ(tj_b.n_agents, 10);
  EXPECT_DOUBLE_EQ(tj_b.p_arrive, 0.05);
  EXPECT_EQ(tj_b.t_max, 40);
}

TEST(EnvSpec, LabelsAndParsing) {
  EXPECT_EQ(EnvSpec::make(Task::kPredatorPrey, Setting::kA).label(), "PP-A");
  EXPECT_EQ(parse_task("treasure_hunt"), Task::kTreasureHunt);
  EXPECT_EQ(parse_task("TJ"), Task::kTrafficJunction);
  EXPECT_EQ(parse_setting("B"), Setting::kB);
  EXPECT_THROW(parse_task("chess"), std::invalid_argument);
  EXPECT_THROW(parse_setting("C"), std::invalid_argument);
}

TEST(EnvSpec, MetricOrientation) {
  EXPECT_TRUE(EnvSpec::make(Task::kTreasureHunt, Setting::kA).lower_is_better());
  EXPECT_TRUE(EnvSpec::make(Task::kPredatorPrey, Setting::kB).lower_is_better());
  EXPECT_FALSE(EnvSpec::make(Task::kTrafficJunction, Setting::kA).lower_is_better());
}

TEST(EnvSpec, Validation) {
  auto s = EnvSpec::make(Task::kPredatorPrey, Setting::kA);
  s.n_agents = 25;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = EnvSpec::make(Task::kTreasureHunt, Setting::kA);
  s.gamma = 0.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Environment, StepErrors) {
  auto env = make_environment(EnvSpec::make(Task::kPredatorPrey, Setting::kA));
  const std::vector<int> acts{0, 0, 0};
  EXPECT_THROW(env->step(acts), std::logic_error);  // not reset
  env->reset(1);
  EXPECT_THROW(env->step(std::vector<int>{0, 0}), std::invalid_argument);
  EXPECT_THROW(env->step(std::vector<int>{0, 0, 5}), std::out_of_range);
}

TEST(Environment, Deterministic) {
  for (Task task : {Task::kTreasureHunt, Task::kPredatorPrey, Task::kTrafficJunction}) {
    const auto spec = EnvSpec::make(task, Setting::kB);
    std::vector<std::vector<double>> trail[2];
    for (int run = 0; run < 2; ++run) {
      auto env = make_environment(spec);
      auto obs = env->reset(42);
      std::mt19937_64 rng(9);
      while (!env->done()) {
        for (auto& o : obs) trail[run].push_back(o);
        std::vector<int> a(spec.n_agents);
        for (int& x : a) x = static_cast<int>(rng() % spec.num_actions());
        auto r = env->step(a);
        trail[run].push_back(r.rewards);
        obs = r.observations;
      }
    }
    EXPECT_EQ(trail[0], trail[1]) << to_string(task);
  }
}

TEST(Environment, ObservationSizes) {
  for (Task task : {Task::kTreasureHunt, Task::kPredatorPrey, Task::kTrafficJunction})
    for (Setting s : {Setting::kA, Setting::kB}) {
      const auto spec = EnvSpec::make(task, s);
      auto env = make_environment(spec);
      for (const auto& o : env->reset(3)) EXPECT_EQ(o.size(), static_cast<std::size_t>(spec.obs_dim()));
    }
}

TEST(TreasureHunt, ObservationLayout) {
  TreasureHunt env(EnvSpec::make(Task::kTreasureHunt, Setting::kA));
  env.reset(1);
  env.place({{0.1, 0.2}, {0.5, 0.5}, {0.9, 0.9}}, {{0.3, 0.4}, {0.6, 0.1}, {0.05, 0.95}});
  EXPECT_EQ(env.observe(0), (Observation{0.1, 0.2, 0.3, 0.4, 0.0}));
  env.step(std::vector<int>{8, 8, 8});
  EXPECT_EQ(env.observe(2), (Observation{0.9, 0.9, 0.05, 0.95, 1.0 / 20}));
}

TEST(TreasureHunt, MovementAndClamping) {
  TreasureHunt env(EnvSpec::make(Task::kTreasureHunt, Setting::kA));
  env.reset(1);
  env.place({{0.5, 0.5}, {0.99, 0.5}, {0.5, 0.5}}, {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}});
  env.step(std::vector<int>{2, 0, 8});  // up (90 degrees), east, stay
  EXPECT_NEAR(env.agents()[0].x, 0.5, 1e-12);
  EXPECT_NEAR(env.agents()[0].y, 0.65, 1e-12);
  EXPECT_EQ(env.agents()[1].x, 1.0);
  EXPECT_EQ(env.agents()[2].x, 0.5);
}

TEST(TreasureHunt, CollectionByOthersOnly) {
  TreasureHunt env(EnvSpec::make(Task::kTreasureHunt, Setting::kA));
  env.reset(1);
  // Agent 0 sits on its own treasure; agent 1 is within r_c of treasure 2.
  env.place({{0.3, 0.3}, {0.7, 0.75}, {0.1, 0.9}}, {{0.3, 0.3}, {0.2, 0.2}, {0.7, 0.7}});
  const auto r = env.step(std::vector<int>{8, 8, 8});
  EXPECT_FALSE(env.found()[0]);
  EXPECT_FALSE(env.found()[1]);
  EXPECT_TRUE(env.found()[2]);
  EXPECT_NEAR(r.rewards[0], 1.0 - 0.05, 1e-12);
  EXPECT_FALSE(r.done);
}

TEST(TreasureHunt, DoneWhenAllFound) {
  TreasureHunt env(EnvSpec::make(Task::kTreasureHunt, Setting::kA));
  env.reset(1);
  env.place({{0.1, 0.1}, {0.5, 0.5}, {0.9, 0.9}}, {{0.9, 0.9}, {0.1, 0.1}, {0.9, 0.1}});
  // Treasures 0 and 1 are collected at once; treasure 2 at (0.9, 0.1) is four
  // diagonal steps away from agent 1.
  for (int t = 0; t < 3; ++t) env.step(std::vector<int>{8, 8, 8});
  EXPECT_TRUE(env.found()[0]);
  EXPECT_TRUE(env.found()[1]);
  EXPECT_FALSE(env.done());
  StepResult r;
  while (!env.done()) {
    const auto& a = env.agents()[1];
    const int act = a.x < 0.85 ? 7 : 8;
    r = env.step(std::vector<int>{8, act, 8});
    if (env.found()[2]) break;
  }
  EXPECT_TRUE(env.found()[2]);
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(env.success());
  EXPECT_EQ(env.t(), 7);
}

TEST(TreasureHunt, SoloAgentNeverFinishes) {
  auto spec = EnvSpec::make(Task::kTreasureHunt, Setting::kA);
  spec.n_agents = 1;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    TreasureHunt env(spec);
    env.reset(seed);
    std::mt19937_64 rng(seed);
    while (!env.done()) env.step(std::vector<int>{static_cast<int>(rng() % 9)});
    EXPECT_EQ(env.t(), spec.t_max);
    EXPECT_FALSE(env.success());
  }
}

TEST(PredatorPrey, SpawnDistinct) {
  PredatorPrey env(EnvSpec::make(Task::kPredatorPrey, Setting::kB));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    env.reset(seed);
    std::vector<PredatorPrey::Cell> all = env.predators();
    all.push_back(env.prey());
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t j = i + 1; j < all.size(); ++j) ASSERT_FALSE(all[i] == all[j]);
  }
}

TEST(PredatorPrey, VisionZeroHidesPrey) {
  PredatorPrey env(EnvSpec::make(Task::kPredatorPrey, Setting::kA));
  env.reset(1);
  env.place({{0, 0}, {1, 0}, {4, 4}}, {0, 1});
  EXPECT_EQ(env.observe(0), (Observation{0.0, 0.0, 0.0}));
  EXPECT_EQ(env.observe(2), (Observation{1.0, 1.0, 0.0}));
  const auto r = env.step(std::vector<int>{PredatorPrey::kDown, PredatorPrey::kStay, PredatorPrey::kUp});
  EXPECT_EQ(env.observe(0), (Observation{0.0, 0.25, 1.0}));
  EXPECT_EQ(r.rewards, (std::vector<double>{0.0, -0.05, -0.05}));
}

TEST(PredatorPrey, VisionOneNeighbourhood) {
  PredatorPrey env(EnvSpec::make(Task::kPredatorPrey, Setting::kB));
  env.reset(1);
  env.place({{2, 2}, {5, 5}, {9, 9}, {0, 9}, {9, 0}}, {3, 1});
  const auto o = env.observe(0);
  ASSERT_EQ(o.size(), 12u);
  // 3x3 window row-major from (dx, dy) = (-1, -1); prey at (+1, -1).
  for (int k = 0; k < 9; ++k) EXPECT_EQ(o[3 + k], k == 2 ? 1.0 : 0.0);
  for (int k = 0; k < 9; ++k) EXPECT_EQ(env.observe(1)[3 + k], 0.0);
}

TEST(PredatorPrey, ReachedStayAndEpisodeEnds) {
  PredatorPrey env(EnvSpec::make(Task::kPredatorPrey, Setting::kA));
  env.reset(1);
  env.place({{2, 1}, {2, 3}, {1, 2}}, {2, 2});
  auto r = env.step(std::vector<int>{PredatorPrey::kDown, PredatorPrey::kStay, PredatorPrey::kStay});
  EXPECT_TRUE(env.reached()[0]);
  r = env.step(std::vector<int>{PredatorPrey::kUp, PredatorPrey::kUp, PredatorPrey::kRight});
  EXPECT_EQ(env.predators()[0], (PredatorPrey::Cell{2, 2}));
  EXPECT_TRUE(r.done);
  EXPECT_TRUE(env.success());
  EXPECT_EQ(env.t(), 2);
}

TEST(PredatorPrey, WallsClamp) {
  PredatorPrey env(EnvSpec::make(Task::kPredatorPrey, Setting::kA));
  env.reset(1);
  env.place({{0, 0}, {4, 4}, {0, 4}}, {2, 2});
  env.step(std::vector<int>{PredatorPrey::kUp, PredatorPrey::kRight, PredatorPrey::kLeft});
  EXPECT_EQ(env.predators()[0], (PredatorPrey::Cell{0, 0}));
  EXPECT_EQ(env.predators()[1], (PredatorPrey::Cell{4, 4}));
  EXPECT_EQ(env.predators()[2], (PredatorPrey::Cell{0, 4}));
}

TEST(PredatorPrey, TimesOutAtTMax) {
  PredatorPrey env(EnvSpec::make(Task::kPredatorPrey, Setting::kA));
  env.reset(1);
  env.place({{0, 0}, {0, 1}, {1, 0}}, {4, 4});
  while (!env.done()) env.step(std::vector<int>{4, 4, 4});
  EXPECT_EQ(env.t(), 20);
  EXPECT_FALSE(env.success());
}

TEST(TrafficJunction, CollisionFlagged) {
  auto spec = EnvSpec::make(Task::kTrafficJunction, Setting::kA);
  spec.p_arrive = 0.0;
  TrafficJunction env(spec);
  env.reset(1);
  const int mid = spec.grid / 2;
  env.spawn(0, 0, mid - 1);  // one step west of the centre
  env.spawn(1, 1, mid - 1);  // one step north of the centre
  const auto r = env.step(std::vector<int>{TrafficJunction::kGas, TrafficJunction::kGas, 0, 0, 0});
  EXPECT_TRUE(r.collision);
  EXPECT_TRUE(env.collided());
  EXPECT_NEAR(r.rewards[0], -10.0 - 0.01, 1e-12);
  EXPECT_FALSE(r.done);
  EXPECT_FALSE(env.success());
}

TEST(TrafficJunction, BrakeAvoidsCollision) {
  auto spec = EnvSpec::make(Task::kTrafficJunction, Setting::kA);
  spec.p_arrive = 0.0;
  TrafficJunction env(spec);
  env.reset(1);
  const int mid = spec.grid / 2;
  env.spawn(0, 0, mid - 1);
  env.spawn(1, 1, mid - 1);
  auto r = env.step(std::vector<int>{TrafficJunction::kGas, TrafficJunction::kBrake, 0, 0, 0});
  EXPECT_FALSE(r.collision);
  r = env.step(std::vector<int>{TrafficJunction::kGas, TrafficJunction::kGas, 0, 0, 0});
  EXPECT_FALSE(r.collision);
  EXPECT_NEAR(r.rewards[1], -0.02, 1e-12);
}

TEST(TrafficJunction, CarsLeaveAndCapHolds) {
  auto spec = EnvSpec::make(Task::kTrafficJunction, Setting::kA);
  spec.p_arrive = 1.0;
  spec.t_max = 40;
  TrafficJunction env(spec);
  env.reset(3);
  EXPECT_EQ(env.active_count(), 2);
  int max_seen = 0;
  while (!env.done()) {
    env.step(std::vector<int>(spec.n_agents, TrafficJunction::kGas));
    max_seen = std::max(max_seen, env.active_count());
    ASSERT_LE(env.active_count(), spec.n_agents);
  }
  EXPECT_EQ(max_seen, spec.n_agents);
  EXPECT_EQ(env.t(), spec.t_max);
}

TEST(TrafficJunction, ObservationLayout) {
  auto spec = EnvSpec::make(Task::kTrafficJunction, Setting::kA);
  spec.p_arrive = 0.0;
  TrafficJunction env(spec);
  env.reset(1);
  env.spawn(2, 1, 4);
  const int g = spec.grid, mid = g / 2;
  const auto o = env.observe(2);
  ASSERT_EQ(o.size(), static_cast<std::size_t>(g * g + 3));
  EXPECT_EQ(o[4 * g + mid], 1.0);
  EXPECT_EQ(o[g * g], 1.0);      // route id
  EXPECT_EQ(o[g * g + 1], 0.0);  // t / t_max
  EXPECT_EQ(o[g * g + 2], 1.0);  // present
  const auto empty = env.observe(0);
  EXPECT_EQ(std::count(empty.begin(), empty.end(), 1.0), 0);
  // Inactive slots may carry any action.
  EXPECT_NO_THROW(env.step(std::vector<int>{7, -3, 0, 9, 9}));
}
