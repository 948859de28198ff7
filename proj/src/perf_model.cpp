#include "splitprune/perf_model.hpp"

#include <cmath>
#include <string>

#include "splitprune/errors.hpp"

namespace splitprune {

void check_environment(const Environment& env) {
  if (!(env.r_tran > 0.0)) throw DomainError("r_tran must be positive");
  if (!(env.r_comp > 0.0)) throw DomainError("r_comp must be positive");
  if (!(env.cloud_seconds_per_flop > 0.0)) throw DomainError("cloud_seconds_per_flop must be positive");
  if (!(env.acc_req >= 0.0 && env.acc_req <= 1.0)) throw DomainError("acc_req must lie in [0, 1]");
}

LatencyBreakdown latency_of_pruned(const LayerGraph& pruned, int partition, const Environment& env) {
  const int n = static_cast<int>(pruned.size());
  if (partition < 0 || partition > n) {
    throw DomainError("partition " + std::to_string(partition) + " outside [0, " + std::to_string(n) + "]");
  }
  const auto p = static_cast<std::size_t>(partition);
  const double edge_flops = static_cast<double>(range_flops(pruned, 0, p));
  const double cloud_flops = static_cast<double>(range_flops(pruned, p, pruned.size()));

  LatencyBreakdown out;
  out.t_edge = env.r_comp * env.cloud_seconds_per_flop * edge_flops;
  out.t_cloud = env.cloud_seconds_per_flop * cloud_flops;
  double bytes = static_cast<double>(boundary_bytes(pruned, partition));
  if (partition == n && env.send_result && n > 0) {
    bytes = static_cast<double>(output_bytes(pruned, pruned.size() - 1));
  }
  out.t_trans = bytes / env.r_tran;
  out.total = out.t_edge + out.t_trans + out.t_cloud;
  return out;
}

LatencyBreakdown latency(const LayerGraph& graph, const Plan& plan, const Environment& env, double r_max) {
  check_plan(graph, plan, r_max);
  return latency_of_pruned(apply_prune(graph, plan.prune, r_max), plan.partition, env);
}

double reward_from(const LatencyBreakdown& lat, double acc, const Environment& env) {
  if (!(acc >= 0.0 && acc <= 1.0)) throw DomainError("accuracy must lie in [0, 1]");
  if (acc < env.acc_req) return 0.0;
  return 1.0 / lat.total;
}

double reward(const LayerGraph& graph, const Plan& plan, const Environment& env, double acc, double r_max) {
  return reward_from(latency(graph, plan, env, r_max), acc, env);
}

}  // namespace splitprune
