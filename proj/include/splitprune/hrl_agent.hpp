#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "splitprune/mdp_env.hpp"
#include "splitprune/neural.hpp"
#include "splitprune/replay.hpp"

namespace splitprune {

struct TrainConfig {
  int batch_size = 128;
  double lr_q = 1e-3;
  double lr_option = 1e-4;
  double tau = 0.01;
  int warmup_per_option = 100;
  int episodes = 1000;  // learning episodes after warm-up
  std::uint64_t seed = 0;
  double noise_init = 0.9;
  double noise_decay = 0.995;
  double epsilon_min = 0.05;
  double priority_alpha = 0.6;
  double priority_eps = 1e-3;
  int hidden = 300;
  int replay_per_conv = 400;  // capacity = replay_per_conv * conv layers
  int updates_per_episode = 1;
  double r_max = kDefaultRateMax;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

enum class SelectMode { Explore, Exploit };

// One row of the training log. Warm-up rows carry no losses.
struct EpisodeMetrics {
  int episode = 0;
  int option = 0;
  double reward = 0.0;
  LatencyBreakdown latency;
  double acc = 0.0;
  std::optional<double> loss_q;
  std::optional<double> loss_option;
  double noise_scale = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "episode,option,reward,t_edge,t_trans,t_cloud,acc,loss_q,loss_option,noise_scale";
std::string metrics_csv_row(const EpisodeMetrics& m);

struct QUpdate {
  double loss = 0.0;
  std::vector<double> residuals;  // mean |Q_t - Return| per episode, in scaled units
};

// Lowest index wins ties.
int argmax_option(std::span<const double> values);

// Partition-option Q-network plus one pruning actor per admissible partition.
//
// The Q-network reads a state whose current Action_t slot holds the rate being
// evaluated, and emits one value per option. Option k's actor maps a state to a
// rate in (0, r_max). Q regresses the undiscounted Monte-Carlo return (the
// terminal reward divided by reward_scale); actors ascend Q through the
// Action_t slot with the Q-network held fixed.
class HrlAgent {
 public:
  HrlAgent(const StateLayout& layout, std::vector<int> options, TrainConfig config);

  const TrainConfig& config() const noexcept { return config_; }
  const std::vector<int>& options() const noexcept { return options_; }
  std::size_t option_count() const noexcept { return options_.size(); }
  int slot_of(int partition) const;
  std::size_t state_size() const noexcept { return state_size_; }

  Mlp& q_net() noexcept { return q_net_; }
  const Mlp& q_net() const noexcept { return q_net_; }
  Mlp& q_target() noexcept { return q_target_; }
  Mlp& actor(std::size_t slot) { return actors_.at(slot); }
  const Mlp& actor(std::size_t slot) const { return actors_.at(slot); }
  Mlp& actor_target(std::size_t slot) { return actor_targets_.at(slot); }
  ReplayBuffer& replay() noexcept { return replay_; }
  const ReplayBuffer& replay() const noexcept { return replay_; }

  double noise_scale() const noexcept { return noise_scale_; }
  int episodes_done() const noexcept { return episodes_done_; }
  // noise_init * noise_decay^episodes
  void set_episodes_done(int episodes);
  double epsilon() const;
  double reward_scale() const noexcept { return reward_scale_; }
  void set_reward_scale(double scale);

  // Q value of each option at its initial state with the option's own first action.
  std::vector<double> option_values(const PruningMdp& mdp) const;
  // Returns a partition index. Explore draws a uniform option with probability epsilon().
  int select_option(const PruningMdp& mdp, SelectMode mode, Rng& rng) const;
  // Actor output, plus N(0, (noise_scale * r_max)^2) when noisy, clamped to [0, r_max].
  double act(int partition, const EnvState& state, bool noisy, Rng& rng) const;

  // warmup_per_option random-rate episodes per option, pushed at max priority.
  std::vector<Episode> warmup(const PruningMdp& mdp);

  QUpdate train_q(std::span<const Episode* const> batch);
  // Every episode must belong to `partition`. Returns -mean Q_t (the minimized objective).
  double train_option(int partition, std::span<const Episode* const> batch);
  void soft_update_targets();

  // Full procedure: warm-up, then config.episodes learning episodes.
  // on_episode receives one row per episode, warm-up included.
  void train(const PruningMdp& mdp, const std::function<void(const EpisodeMetrics&)>& on_episode = {});

  // Exploit-mode option and noiseless rollout.
  Episode plan(const PruningMdp& mdp) const;

  // Checkpoint: online networks plus schedule metadata. Target networks are
  // restored as copies of the online ones; optimizer moments are not saved.
  nlohmann::json to_json() const;
  static HrlAgent from_json(const nlohmann::json& j);

 private:
  Matrix q_inputs(std::span<const Episode* const> batch) const;

  TrainConfig config_;
  std::vector<int> options_;
  std::size_t state_size_;
  std::size_t action_offset_;
  Mlp q_net_;
  Mlp q_target_;
  Adam q_optim_;
  std::vector<Mlp> actors_;
  std::vector<Mlp> actor_targets_;
  std::vector<Adam> actor_optims_;
  ReplayBuffer replay_;
  double noise_scale_;
  int episodes_done_ = 0;
  double reward_scale_ = 1.0;
  Rng noise_rng_;
  Rng replay_rng_;
};

}  // namespace splitprune
