#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "splitprune/mdp_env.hpp"
#include "splitprune/rng.hpp"

namespace splitprune {

// Binary sum tree over a fixed number of leaves.
class SumTree {
 public:
  explicit SumTree(std::size_t leaves);

  void set(std::size_t leaf, double value);
  double get(std::size_t leaf) const { return tree_[base_ + leaf]; }
  double total() const { return tree_[1]; }
  // Leaf whose cumulative range contains mass, for mass in [0, total()).
  std::size_t find(double mass) const;
  std::size_t leaves() const noexcept { return leaves_; }

 private:
  std::size_t leaves_;
  std::size_t base_;
  std::vector<double> tree_;
};

// Proportional prioritized replay over whole episodes with FIFO eviction.
// Sampling probability of slot i is priority_i^alpha / sum_j priority_j^alpha.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, double alpha = 0.6, double epsilon = 1e-3);

  // New entries get the largest priority seen so far unless one is given.
  std::size_t push(Episode episode, std::optional<double> priority = std::nullopt);
  // priority = |residual| + epsilon
  void update_residual(std::size_t slot, double residual);
  void set_priority(std::size_t slot, double priority);

  // Slots drawn with replacement.
  std::vector<std::size_t> sample(std::size_t count, Rng& rng) const;

  const Episode& at(std::size_t slot) const { return episodes_.at(slot); }
  double priority(std::size_t slot) const { return priorities_.at(slot); }
  double probability(std::size_t slot) const;
  double max_priority() const noexcept { return max_priority_; }
  std::size_t size() const noexcept { return episodes_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  // Total pushes, including evicted entries.
  std::size_t pushed() const noexcept { return pushed_; }
  double alpha() const noexcept { return alpha_; }
  double epsilon() const noexcept { return epsilon_; }

 private:
  std::size_t capacity_;
  double alpha_;
  double epsilon_;
  std::vector<Episode> episodes_;
  std::vector<double> priorities_;
  SumTree tree_;
  std::size_t next_ = 0;
  std::size_t pushed_ = 0;
  double max_priority_ = 1.0;
};

}  // namespace splitprune
