#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "splitprune/brute_oracle.hpp"
#include "splitprune/errors.hpp"

using namespace splitprune;

TEST(Grid, CountsAndLevels) {
  const LayerGraph g = preset("toy3");
  const Grid coarse = Grid::coarse(g);
  EXPECT_EQ(coarse.rate_levels, (std::vector<double>{0.0, 0.25, 0.5, 0.75, 0.9}));
  EXPECT_EQ(coarse.options.size(), 4u);
  EXPECT_EQ(plan_count(g, coarse), 500u);

  const Grid fine = Grid::fine(g);
  ASSERT_EQ(fine.rate_levels.size(), 19u);
  EXPECT_EQ(fine.rate_levels.front(), 0.0);
  EXPECT_EQ(fine.rate_levels.back(), 0.9);
  EXPECT_EQ(fine.rate_levels[7], 0.35);

  EXPECT_EQ(plan_count(preset("resnet34"), Grid::coarse(preset("resnet34"))),
            std::numeric_limits<std::uint64_t>::max());
}

TEST(Grid, ValidateRejectsBadLevels) {
  const LayerGraph g = preset("toy3");
  Grid grid = Grid::coarse(g);
  grid.rate_levels = {0.0, 0.5, 0.5};
  EXPECT_THROW(grid.validate(g), DomainError);
  grid.rate_levels = {0.0, 0.95};
  EXPECT_THROW(grid.validate(g), DomainError);
  grid.rate_levels = {};
  EXPECT_THROW(grid.validate(g), DomainError);
  grid = Grid::coarse(g);
  grid.options = {7};
  EXPECT_THROW(grid.validate(g), DomainError);
}

TEST(PlanAt, EnumerationOrder) {
  const LayerGraph g = preset("toy3");
  const Grid grid = Grid::coarse(g);
  EXPECT_EQ(plan_at(g, grid, 0), (Plan{0, PruneVector{{0, 0, 0}}}));
  EXPECT_EQ(plan_at(g, grid, 1), (Plan{0, PruneVector{{0, 0, 0.25}}}));
  EXPECT_EQ(plan_at(g, grid, 5), (Plan{0, PruneVector{{0, 0.25, 0}}}));
  EXPECT_EQ(plan_at(g, grid, 125), (Plan{1, PruneVector{{0, 0, 0}}}));
  EXPECT_EQ(plan_at(g, grid, 499), (Plan{3, PruneVector{{0.9, 0.9, 0.9}}}));
}

TEST(Enumerate, EvaluatesEveryPlan) {
  const LayerGraph g = preset("toy3");
  const Environment env;
  const SurrogateOracle oracle(g, 0.9);
  const BruteResult r = enumerate_best(g, env, oracle, Grid::coarse(g), true);
  EXPECT_EQ(r.evaluated, 500u);
  ASSERT_EQ(r.table.size(), 500u);
  for (std::size_t i = 0; i < r.table.size(); ++i) {
    EXPECT_EQ(r.table[i].plan, plan_at(g, Grid::coarse(g), i));
    EXPECT_LE(r.table[i].reward, r.best.reward);
  }
}

TEST(Enumerate, UnreachableFloorLeavesOnlyZeroPrune) {
  const LayerGraph g = preset("toy3");
  Environment env;
  env.acc_req = 0.9;  // only the unpruned model reaches base accuracy
  const SurrogateOracle oracle(g, 0.9);
  const BruteResult r = enumerate_best(g, env, oracle, Grid::coarse(g));
  EXPECT_EQ(r.best.plan.prune, PruneVector::zeros(3));
  EXPECT_GT(r.best.reward, 0.0);
}

TEST(Enumerate, BestBeatsRandomGridPlans) {
  const LayerGraph g = preset("toy4");
  const Environment env;
  const SurrogateOracle oracle(g, 0.9);
  const Grid grid = Grid::coarse(g);
  const BruteResult r = enumerate_best(g, env, oracle, grid);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> pick(0, plan_count(g, grid) - 1);
  for (int i = 0; i < 500; ++i) {
    const PlanRow row = evaluate_plan(g, plan_at(g, grid, pick(rng)), env, oracle);
    EXPECT_LE(row.reward, r.best.reward);
  }
}

TEST(Enumerate, ParallelMatchesSerial) {
  const Environment env;
  for (const std::string& name : {"toy3", "toy4"}) {
    const LayerGraph g = preset(name);
    const SurrogateOracle oracle(g, 0.9);
    const Grid grid = Grid::coarse(g);
    const BruteResult a = enumerate_best_serial(g, env, oracle, grid, true);
    const BruteResult b = enumerate_best(g, env, oracle, grid, true);
    EXPECT_EQ(a.best.plan, b.best.plan);
    EXPECT_EQ(a.best.reward, b.best.reward);
    EXPECT_EQ(a.evaluated, b.evaluated);
    ASSERT_EQ(a.table.size(), b.table.size());
    for (std::size_t i = 0; i < a.table.size(); ++i) EXPECT_EQ(a.table[i].reward, b.table[i].reward);
  }
}

TEST(Enumerate, TiesGoToLowestIndex) {
  // With an unreachable floor every plan scores 0, so plan #0 wins.
  const LayerGraph g = preset("toy3");
  Environment env;
  env.acc_req = 0.95;
  const SurrogateOracle oracle(g, 0.9);
  const BruteResult r = enumerate_best(g, env, oracle, Grid::coarse(g));
  EXPECT_EQ(r.best.reward, 0.0);
  EXPECT_EQ(r.best.plan, plan_at(g, Grid::coarse(g), 0));
}

TEST(Enumerate, CapRefusesWithCount) {
  const LayerGraph g = preset("vgg16");
  const SurrogateOracle oracle(g, 0.9);
  try {
    enumerate_best(g, Environment{}, oracle, Grid::coarse(g));
    FAIL() << "expected Refused";
  } catch (const Refused& e) {
    EXPECT_EQ(e.count(), plan_count(g, Grid::coarse(g)));
  }
  const LayerGraph t = preset("toy3");
  EXPECT_THROW(enumerate_best(t, Environment{}, SurrogateOracle(t, 0.9), Grid::coarse(t), false, 499), Refused);
}

TEST(TableCsv, HeaderAndRows) {
  const LayerGraph g = preset("toy3");
  const SurrogateOracle oracle(g, 0.9);
  const BruteResult r = enumerate_best(g, Environment{}, oracle, Grid::coarse(g), true);
  std::ostringstream out;
  write_table_csv(out, g, r.table);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "partition,rate_0,rate_1,rate_2,acc,t_edge,t_trans,t_cloud,reward");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 500u);
}
