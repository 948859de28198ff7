#include "splitprune/replay.hpp"

#include <cmath>

#include "splitprune/errors.hpp"

namespace splitprune {

SumTree::SumTree(std::size_t leaves) : leaves_(leaves), base_(1) {
  if (leaves == 0) throw DomainError("sum tree needs at least one leaf");
  while (base_ < leaves) base_ <<= 1;
  tree_.assign(2 * base_, 0.0);
}

void SumTree::set(std::size_t leaf, double value) {
  if (leaf >= leaves_) throw DomainError("sum tree leaf out of range");
  std::size_t i = base_ + leaf;
  tree_[i] = value;
  // Recompute parents from children so repeated updates do not accumulate drift.
  for (i >>= 1; i >= 1; i >>= 1) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
}

std::size_t SumTree::find(double mass) const {
  std::size_t i = 1;
  while (i < base_) {
    const std::size_t left = 2 * i;
    if (mass < tree_[left] || tree_[left + 1] <= 0.0) {
      i = left;
    } else {
      mass -= tree_[left];
      i = left + 1;
    }
  }
  std::size_t leaf = i - base_;
  return leaf < leaves_ ? leaf : leaves_ - 1;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, double alpha, double epsilon)
    : capacity_(capacity), alpha_(alpha), epsilon_(epsilon), tree_(capacity == 0 ? 1 : capacity) {
  if (capacity == 0) throw DomainError("replay capacity must be positive");
  if (!(alpha >= 0.0)) throw DomainError("priority exponent must be non-negative");
  if (!(epsilon > 0.0)) throw DomainError("priority epsilon must be positive");
  episodes_.reserve(capacity);
  priorities_.reserve(capacity);
}

std::size_t ReplayBuffer::push(Episode episode, std::optional<double> priority) {
  const double p = priority.value_or(max_priority_);
  std::size_t slot;
  if (episodes_.size() < capacity_) {
    slot = episodes_.size();
    episodes_.push_back(std::move(episode));
    priorities_.push_back(0.0);
  } else {
    slot = next_;
    episodes_[slot] = std::move(episode);
  }
  next_ = (slot + 1) % capacity_;
  ++pushed_;
  set_priority(slot, p);
  return slot;
}

void ReplayBuffer::set_priority(std::size_t slot, double priority) {
  if (!(priority > 0.0)) throw DomainError("priority must be positive");
  priorities_.at(slot) = priority;
  tree_.set(slot, std::pow(priority, alpha_));
  if (priority > max_priority_) max_priority_ = priority;
}

void ReplayBuffer::update_residual(std::size_t slot, double residual) {
  set_priority(slot, std::abs(residual) + epsilon_);
}

double ReplayBuffer::probability(std::size_t slot) const { return tree_.get(slot) / tree_.total(); }

std::vector<std::size_t> ReplayBuffer::sample(std::size_t count, Rng& rng) const {
  if (episodes_.empty()) throw DomainError("cannot sample from an empty replay buffer");
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<std::size_t> out;
  out.reserve(count);
  const double total = tree_.total();
  for (std::size_t i = 0; i < count; ++i) out.push_back(tree_.find(dist(rng) * total));
  return out;
}

}  // namespace splitprune
