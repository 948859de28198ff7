#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "splitprune/model_graph.hpp"

namespace splitprune {

// Accuracy of a pruned model, deterministic per (graph, prune) and
// non-increasing in every pruning rate.
class AccuracyOracle {
 public:
  virtual ~AccuracyOracle() = default;
  virtual double evaluate(const LayerGraph& graph, const PruneVector& prune) const = 0;
};

struct SurrogateParams {
  double base_acc = 0.9;
  std::vector<double> sensitivity;  // one weight per conv layer, sums to 1
  double exponent = 2.0;
  double drop_scale = 0.5;
};

// Per-conv weights proportional to each conv layer's share of conv FLOPs.
std::vector<double> sensitivity_from_flops(const LayerGraph& graph);

// clamp(base - drop_scale * sum_l w_l * r_l^exponent, 0, 1)
double surrogate_eval(const SurrogateParams& params, const PruneVector& prune);

class SurrogateOracle final : public AccuracyOracle {
 public:
  explicit SurrogateOracle(SurrogateParams params);
  // Sensitivities from the graph's FLOPs profile.
  SurrogateOracle(const LayerGraph& graph, double base_acc, double exponent = 2.0, double drop_scale = 0.5);

  double evaluate(const LayerGraph& graph, const PruneVector& prune) const override;
  const SurrogateParams& params() const noexcept { return params_; }

 private:
  SurrogateParams params_;
};

// Lookup table keyed by rate vectors snapped to a grid.
class TableOracle final : public AccuracyOracle {
 public:
  static constexpr double kDefaultGrid = 0.05;

  // Lines "r1,r2,...,rL -> acc"; '#' starts a comment.
  static TableOracle parse(std::string_view text, bool strict, double grid = kDefaultGrid);
  static TableOracle load(const std::string& path, bool strict, double grid = kDefaultGrid);

  double evaluate(const LayerGraph& graph, const PruneVector& prune) const override;
  // Exact hit on the quantized key; otherwise the nearest stored key (squared grid
  // distance, first in file order on ties) unless strict.
  double lookup(const std::vector<double>& rates) const;

  std::vector<long> quantize(const std::vector<double>& rates) const;
  std::size_t size() const noexcept { return entries_.size(); }
  bool strict() const noexcept { return strict_; }

 private:
  struct Entry {
    std::vector<long> key;
    double acc;
  };

  bool strict_ = true;
  double grid_ = kDefaultGrid;
  std::vector<Entry> entries_;
  std::map<std::vector<long>, std::size_t> index_;
};

}  // namespace splitprune
