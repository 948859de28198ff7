#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "splitprune/accuracy_oracle.hpp"
#include "splitprune/model_graph.hpp"
#include "splitprune/perf_model.hpp"
#include "splitprune/rng.hpp"

namespace splitprune {

// Normalization constants for the environment part of the state.
inline constexpr double kRateNormBytesPerSecond = 10.0 * 1024.0 * 1024.0;
inline constexpr double kCompNorm = 100.0;

// Flat state layout (version 1):
//   [0]  r_tran / 10 MB/s
//   [1]  r_comp / 100
//   [2]  acc_req
//   FLOPs_t     one per layer, current layer FLOPs / max unpruned layer FLOPs
//   Channel_t   one per conv layer, current out channels / max channel count
//   Data_t      edge-segment FLOPs / total unpruned FLOPs,
//               channels at the cut / max channel count,
//               bytes at the cut / max tensor bytes
//   Layer_t     one-hot over conv layers, all zero once every layer is decided
//   Action_t    rates decided so far, 0 for undecided layers
struct StateLayout {
  static constexpr int kVersion = 1;

  std::size_t n_layers = 0;
  std::size_t n_conv = 0;

  std::size_t flops_offset() const { return 3; }
  std::size_t channel_offset() const { return flops_offset() + n_layers; }
  std::size_t data_offset() const { return channel_offset() + n_conv; }
  std::size_t layer_offset() const { return data_offset() + 3; }
  std::size_t action_offset() const { return layer_offset() + n_conv; }
  std::size_t size() const { return action_offset() + n_conv; }
};

struct EnvState {
  int option = 0;                 // partition index
  int cursor = 0;                 // conv layer awaiting a decision; n_conv when terminal
  std::vector<double> rates;      // decided rates, zeros past the cursor
  std::vector<double> features;   // flat vector per StateLayout

  bool terminal() const { return cursor >= static_cast<int>(rates.size()); }

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct Step {
  std::vector<double> state;
  double rate = 0.0;

  friend bool operator==(const Step&, const Step&) = default;
};

struct Episode {
  int option = 0;
  std::vector<Step> steps;
  Plan plan;
  double terminal_reward = 0.0;
  double final_acc = 0.0;
  LatencyBreakdown latency;

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;  // non-zero only on the terminal transition
  bool terminal = false;
};

// Maps a state to a rate in [0, r_max]; may draw from the supplied stream.
using Policy = std::function<double(const EnvState&, Rng&)>;

// Sequential per-conv-layer pruning decisions under a fixed partition.
// All members are const after construction, so one instance can serve many
// concurrent rollouts.
class PruningMdp {
 public:
  PruningMdp(const LayerGraph& graph, const Environment& env, const AccuracyOracle& oracle,
             double r_max = kDefaultRateMax);

  const LayerGraph& graph() const noexcept { return *graph_; }
  const Environment& environment() const noexcept { return env_; }
  const AccuracyOracle& oracle() const noexcept { return *oracle_; }
  const StateLayout& layout() const noexcept { return layout_; }
  const std::vector<int>& options() const noexcept { return options_; }
  double r_max() const noexcept { return r_max_; }

  bool is_option(int partition) const;

  EnvState reset(int option) const;
  StepResult step(const EnvState& state, double rate) const;

  // Features of `state` with `rate` written into the current Action_t slot.
  std::vector<double> with_action(const EnvState& state, double rate) const;
  std::size_t action_slot(const EnvState& state) const;

  // Evaluates a complete plan with the oracle and the latency model.
  Episode evaluate(const Plan& plan) const;

  Episode rollout(int option, const Policy& policy, Rng& rng) const;

 private:
  std::vector<double> features(int option, int cursor, const std::vector<double>& rates) const;

  const LayerGraph* graph_;
  Environment env_;
  const AccuracyOracle* oracle_;
  double r_max_;
  StateLayout layout_;
  std::vector<int> options_;
  double max_layer_flops_ = 1.0;
  double total_flops_ = 1.0;
  double max_channels_ = 1.0;
  double max_bytes_ = 1.0;
};

struct RolloutJob {
  int option = 0;
  std::uint64_t stream = 0;  // index of the job's noise sub-stream
};

// Runs each job with its own sub-stream substream(seed, name, job.stream).
// The policy must be safe to call concurrently.
std::vector<Episode> rollout_batch_serial(const PruningMdp& mdp, std::span<const RolloutJob> jobs,
                                          const Policy& policy, std::uint64_t seed, std::string_view name);
std::vector<Episode> rollout_batch(const PruningMdp& mdp, std::span<const RolloutJob> jobs, const Policy& policy,
                                   std::uint64_t seed, std::string_view name);

// One JSON object per line.
std::string episode_to_json(const Episode& episode);
Episode episode_from_json(const std::string& line);

}  // namespace splitprune
