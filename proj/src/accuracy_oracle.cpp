#include "splitprune/accuracy_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "splitprune/errors.hpp"

namespace splitprune {

std::vector<double> sensitivity_from_flops(const LayerGraph& graph) {
  std::vector<double> w;
  w.reserve(graph.conv_count());
  for (int idx : graph.conv_indices()) w.push_back(static_cast<double>(layer_flops(graph, idx)));
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= sum;
  return w;
}

double surrogate_eval(const SurrogateParams& params, const PruneVector& prune) {
  if (prune.rates.size() != params.sensitivity.size()) {
    throw DomainError("surrogate: expected " + std::to_string(params.sensitivity.size()) + " rates, got " +
                      std::to_string(prune.rates.size()));
  }
  double drop = 0.0;
  for (std::size_t l = 0; l < prune.rates.size(); ++l) {
    drop += params.sensitivity[l] * std::pow(prune.rates[l], params.exponent);
  }
  return std::clamp(params.base_acc - params.drop_scale * drop, 0.0, 1.0);
}

SurrogateOracle::SurrogateOracle(SurrogateParams params) : params_(std::move(params)) {
  if (!(params_.base_acc >= 0.0 && params_.base_acc <= 1.0)) throw DomainError("base_acc must lie in [0, 1]");
  if (!(params_.exponent > 0.0)) throw DomainError("exponent must be positive");
  if (!(params_.drop_scale >= 0.0)) throw DomainError("drop_scale must be non-negative");
  double sum = 0.0;
  for (double w : params_.sensitivity) {
    if (!(w > 0.0)) throw DomainError("sensitivity weights must be positive");
    sum += w;
  }
  if (params_.sensitivity.empty()) throw DomainError("sensitivity must not be empty");
  for (double& w : params_.sensitivity) w /= sum;
}

SurrogateOracle::SurrogateOracle(const LayerGraph& graph, double base_acc, double exponent, double drop_scale)
    : SurrogateOracle(SurrogateParams{base_acc, sensitivity_from_flops(graph), exponent, drop_scale}) {}

double SurrogateOracle::evaluate(const LayerGraph&, const PruneVector& prune) const {
  return surrogate_eval(params_, prune);
}

// ---------------------------------------------------------------------------

std::vector<long> TableOracle::quantize(const std::vector<double>& rates) const {
  std::vector<long> key;
  key.reserve(rates.size());
  for (double r : rates) key.push_back(std::lround(r / grid_));
  return key;
}

TableOracle TableOracle::parse(std::string_view text, bool strict, double grid) {
  if (!(grid > 0.0)) throw DomainError("table grid must be positive");
  TableOracle table;
  table.strict_ = strict;
  table.grid_ = grid;

  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;

    std::size_t arrow = raw.find("->");
    std::size_t arrow_len = 2;
    if (arrow == std::string::npos) {
      arrow = raw.find("→");
      arrow_len = std::string("→").size();
    }
    if (arrow == std::string::npos) throw ParseError("expected 'rates -> accuracy'", lineno);

    std::vector<double> rates;
    std::istringstream lhs(raw.substr(0, arrow));
    for (std::string field; std::getline(lhs, field, ',');) {
      try {
        std::size_t used = 0;
        rates.push_back(std::stod(field, &used));
        if (field.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError("bad rate '" + field + "'", lineno);
      }
    }
    double acc = 0.0;
    const std::string rhs = raw.substr(arrow + arrow_len);
    try {
      std::size_t used = 0;
      acc = std::stod(rhs, &used);
      if (rhs.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(rhs);
    } catch (const std::exception&) {
      throw ParseError("bad accuracy '" + rhs + "'", lineno);
    }
    if (!(acc >= 0.0 && acc <= 1.0)) throw ParseError("accuracy outside [0, 1]", lineno);
    if (!table.entries_.empty() && table.entries_.front().key.size() != rates.size()) {
      throw ParseError("inconsistent rate-vector length", lineno);
    }
    auto key = table.quantize(rates);
    if (table.index_.contains(key)) throw ParseError("duplicate key after quantization", lineno);
    table.index_.emplace(key, table.entries_.size());
    table.entries_.push_back({std::move(key), acc});
  }
  return table;
}

TableOracle TableOracle::load(const std::string& path, bool strict, double grid) {
  std::ifstream f(path);
  if (!f) throw NotFound("cannot open accuracy table '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), strict, grid);
}

double TableOracle::lookup(const std::vector<double>& rates) const {
  const auto key = quantize(rates);
  if (!entries_.empty() && entries_.front().key.size() != key.size()) {
    throw DomainError("rate-vector length does not match table");
  }
  if (auto it = index_.find(key); it != index_.end()) return entries_[it->second].acc;
  if (strict_ || entries_.empty()) throw NotFound("no accuracy entry for the requested rates");

  double best = std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (const Entry& e : entries_) {
    double d = 0.0;
    for (std::size_t i = 0; i < key.size(); ++i) {
      const double diff = static_cast<double>(e.key[i] - key[i]);
      d += diff * diff;
    }
    if (d < best) {
      best = d;
      acc = e.acc;
    }
  }
  return acc;
}

double TableOracle::evaluate(const LayerGraph&, const PruneVector& prune) const { return lookup(prune.rates); }

}  // namespace splitprune
