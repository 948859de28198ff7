#pragma once

#include "splitprune/model_graph.hpp"

namespace splitprune {

// 1 KB = 1024 bytes, so 1280 KB/s = 1,310,720 B/s.
inline constexpr double kBytesPerKilobyte = 1024.0;
inline constexpr double kDefaultCloudSecondsPerFlop = 1e-11;

struct Environment {
  double r_tran = 1280.0 * kBytesPerKilobyte;  // bytes / second
  double r_comp = 20.0;                          // edge latency / cloud latency
  double acc_req = 0.8;
  double cloud_seconds_per_flop = kDefaultCloudSecondsPerFlop;
  // All-edge plans upload the final layer output when set.
  bool send_result = false;

  static Environment from_kbps(double r_tran_kbps, double r_comp, double acc_req) {
    Environment env;
    env.r_tran = r_tran_kbps * kBytesPerKilobyte;
    env.r_comp = r_comp;
    env.acc_req = acc_req;
    return env;
  }

  friend bool operator==(const Environment&, const Environment&) = default;
};

void check_environment(const Environment& env);

struct LatencyBreakdown {
  double t_edge = 0.0;
  double t_trans = 0.0;
  double t_cloud = 0.0;
  double total = 0.0;

  friend bool operator==(const LatencyBreakdown&, const LatencyBreakdown&) = default;
};

// Latency of an already-pruned graph cut at `partition`.
LatencyBreakdown latency_of_pruned(const LayerGraph& pruned, int partition, const Environment& env);

LatencyBreakdown latency(const LayerGraph& graph, const Plan& plan, const Environment& env,
                         double r_max = kDefaultRateMax);

// 1 / total latency when acc >= acc_req, otherwise exactly 0.
double reward_from(const LatencyBreakdown& lat, double acc, const Environment& env);

double reward(const LayerGraph& graph, const Plan& plan, const Environment& env, double acc,
              double r_max = kDefaultRateMax);

}  // namespace splitprune
