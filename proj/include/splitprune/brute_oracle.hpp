#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "splitprune/accuracy_oracle.hpp"
#include "splitprune/model_graph.hpp"
#include "splitprune/perf_model.hpp"

namespace splitprune {

inline constexpr std::uint64_t kDefaultEnumerationCap = 1'000'000;

struct Grid {
  std::vector<double> rate_levels{0.0, 0.25, 0.5, 0.75, 0.9};
  std::vector<int> options;

  // 0, 0.05, ..., r_max
  static Grid fine(const LayerGraph& graph, double r_max = kDefaultRateMax);
  static Grid coarse(const LayerGraph& graph);

  void validate(const LayerGraph& graph, double r_max = kDefaultRateMax) const;
};

struct PlanRow {
  Plan plan;
  double acc = 0.0;
  LatencyBreakdown latency;
  double reward = 0.0;
};

struct BruteResult {
  PlanRow best;
  std::uint64_t evaluated = 0;
  std::vector<PlanRow> table;  // filled only when requested, in enumeration order
};

// Number of grid plans, saturating at UINT64_MAX.
std::uint64_t plan_count(const LayerGraph& graph, const Grid& grid);

// Plan #index in enumeration order: option index most significant, then the
// level index of conv 0, conv 1, ... Enumeration order is lexicographic, so the
// lowest index among equal rewards is the lexicographic tie-break.
Plan plan_at(const LayerGraph& graph, const Grid& grid, std::uint64_t index);

PlanRow evaluate_plan(const LayerGraph& graph, const Plan& plan, const Environment& env,
                      const AccuracyOracle& oracle, double r_max = kDefaultRateMax);

// Throws Refused when plan_count exceeds cap.
BruteResult enumerate_best_serial(const LayerGraph& graph, const Environment& env, const AccuracyOracle& oracle,
                                  const Grid& grid, bool keep_table = false,
                                  std::uint64_t cap = kDefaultEnumerationCap, double r_max = kDefaultRateMax);
BruteResult enumerate_best(const LayerGraph& graph, const Environment& env, const AccuracyOracle& oracle,
                           const Grid& grid, bool keep_table = false, std::uint64_t cap = kDefaultEnumerationCap,
                           double r_max = kDefaultRateMax);

// partition, rate_0..rate_{n-1}, acc, t_edge, t_trans, t_cloud, reward
void write_table_csv(std::ostream& out, const LayerGraph& graph, const std::vector<PlanRow>& rows);

}  // namespace splitprune
