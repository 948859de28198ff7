#include "splitprune/brute_oracle.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <limits>
#include <string>

#include "splitprune/errors.hpp"

namespace splitprune {

Grid Grid::fine(const LayerGraph& graph, double r_max) {
  Grid g;
  g.rate_levels.clear();
  // i / 20 is correctly rounded, unlike i * 0.05 (18 * 0.05 > 0.9).
  for (int i = 0; i / 20.0 <= r_max + 1e-12; ++i) g.rate_levels.push_back(std::min(i / 20.0, r_max));
  g.options = partition_options(graph);
  return g;
}

Grid Grid::coarse(const LayerGraph& graph) {
  Grid g;
  g.options = partition_options(graph);
  return g;
}

void Grid::validate(const LayerGraph& graph, double r_max) const {
  if (rate_levels.empty()) throw DomainError("grid needs at least one rate level");
  for (std::size_t i = 0; i < rate_levels.size(); ++i) {
    if (!(rate_levels[i] >= 0.0 && rate_levels[i] <= r_max)) throw DomainError("grid level outside [0, r_max]");
    if (i > 0 && !(rate_levels[i] > rate_levels[i - 1])) throw DomainError("grid levels must be strictly ascending");
  }
  if (options.empty()) throw DomainError("grid needs at least one partition option");
  for (int p : options) {
    if (p < 0 || p > static_cast<int>(graph.size())) throw DomainError("grid option outside the graph");
  }
}

std::uint64_t plan_count(const LayerGraph& graph, const Grid& grid) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t n = grid.options.size();
  for (std::size_t i = 0; i < graph.conv_count(); ++i) {
    if (n != 0 && grid.rate_levels.size() > kMax / n) return kMax;
    n *= grid.rate_levels.size();
  }
  return n;
}

Plan plan_at(const LayerGraph& graph, const Grid& grid, std::uint64_t index) {
  const std::size_t convs = graph.conv_count();
  const std::uint64_t levels = grid.rate_levels.size();
  Plan plan;
  plan.prune.rates.assign(convs, 0.0);
  for (std::size_t c = convs; c-- > 0;) {
    plan.prune.rates[c] = grid.rate_levels[index % levels];
    index /= levels;
  }
  plan.partition = grid.options.at(index);
  return plan;
}

PlanRow evaluate_plan(const LayerGraph& graph, const Plan& plan, const Environment& env,
                      const AccuracyOracle& oracle, double r_max) {
  PlanRow row;
  row.plan = plan;
  row.acc = oracle.evaluate(graph, plan.prune);
  row.latency = latency(graph, plan, env, r_max);
  row.reward = reward_from(row.latency, row.acc, env);
  return row;
}

namespace {

std::uint64_t checked_count(const LayerGraph& graph, const Environment& env, const Grid& grid, std::uint64_t cap,
                            double r_max) {
  check_environment(env);
  grid.validate(graph, r_max);
  const std::uint64_t n = plan_count(graph, grid);
  if (n > cap) {
    throw Refused("enumeration of " + std::to_string(n) + " plans exceeds the cap of " + std::to_string(cap), n);
  }
  return n;
}

// Higher reward wins; equal rewards go to the lower enumeration index.
bool better(double reward, std::uint64_t index, double best_reward, std::uint64_t best_index) {
  return reward > best_reward || (reward == best_reward && index < best_index);
}

}  // namespace

BruteResult enumerate_best_serial(const LayerGraph& graph, const Environment& env, const AccuracyOracle& oracle,
                                  const Grid& grid, bool keep_table, std::uint64_t cap, double r_max) {
  const std::uint64_t n = checked_count(graph, env, grid, cap, r_max);
  BruteResult result;
  result.evaluated = n;
  if (keep_table) result.table.reserve(n);
  std::uint64_t best_index = std::numeric_limits<std::uint64_t>::max();
  double best_reward = -1.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    PlanRow row = evaluate_plan(graph, plan_at(graph, grid, i), env, oracle, r_max);
    if (better(row.reward, i, best_reward, best_index)) {
      best_reward = row.reward;
      best_index = i;
      result.best = row;
    }
    if (keep_table) result.table.push_back(std::move(row));
  }
  return result;
}

BruteResult enumerate_best(const LayerGraph& graph, const Environment& env, const AccuracyOracle& oracle,
                           const Grid& grid, bool keep_table, std::uint64_t cap, double r_max) {
  const std::uint64_t n = checked_count(graph, env, grid, cap, r_max);
  BruteResult result;
  result.evaluated = n;
  if (keep_table) result.table.resize(n);

  std::uint64_t best_index = std::numeric_limits<std::uint64_t>::max();
  double best_reward = -1.0;
  std::exception_ptr failure;
  const auto count = static_cast<std::int64_t>(n);

#pragma omp parallel
  {
    std::uint64_t local_index = std::numeric_limits<std::uint64_t>::max();
    double local_reward = -1.0;
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) {
      try {
        const auto idx = static_cast<std::uint64_t>(i);
        PlanRow row = evaluate_plan(graph, plan_at(graph, grid, idx), env, oracle, r_max);
        if (better(row.reward, idx, local_reward, local_index)) {
          local_reward = row.reward;
          local_index = idx;
        }
        if (keep_table) result.table[idx] = std::move(row);
      } catch (...) {
#pragma omp critical(splitprune_brute_error)
        if (!failure) failure = std::current_exception();
      }
    }
#pragma omp critical(splitprune_brute_reduce)
    if (better(local_reward, local_index, best_reward, best_index)) {
      best_reward = local_reward;
      best_index = local_index;
    }
  }
  if (failure) std::rethrow_exception(failure);
  result.best = evaluate_plan(graph, plan_at(graph, grid, best_index), env, oracle, r_max);
  return result;
}

void write_table_csv(std::ostream& out, const LayerGraph& graph, const std::vector<PlanRow>& rows) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "partition";
  for (std::size_t c = 0; c < graph.conv_count(); ++c) out << ",rate_" << c;
  out << ",acc,t_edge,t_trans,t_cloud,reward\n";
  for (const PlanRow& r : rows) {
    out << r.plan.partition;
    for (double rate : r.plan.prune.rates) out << "," << num(rate);
    out << "," << num(r.acc) << "," << num(r.latency.t_edge) << "," << num(r.latency.t_trans) << ","
        << num(r.latency.t_cloud) << "," << num(r.reward) << "\n";
  }
}

}  // namespace splitprune
