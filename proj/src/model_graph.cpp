#include "splitprune/model_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "splitprune/errors.hpp"

namespace splitprune {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Pool: return "pool";
    case LayerKind::FullyConnected: return "fc";
    case LayerKind::ResidualAdd: return "add";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

namespace {

// Recomputes every in/out channel count from the Conv out_channels already stored.
void propagate_channels(std::vector<LayerDesc>& layers, const InputShape& input) {
  auto channels_after = [&](int i) { return i < 0 ? input.c : layers[i].out_channels; };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    LayerDesc& l = layers[i];
    l.in_channels = channels_after(static_cast<int>(i) - 1);
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::FullyConnected:
        break;
      case LayerKind::Pool:
        l.out_channels = l.in_channels;
        break;
      case LayerKind::Flatten:
        l.out_channels = l.in_channels * l.in_spatial.h * l.in_spatial.w;
        break;
      case LayerKind::ResidualAdd:
        l.skip_channels = channels_after(l.skip_from);
        l.out_channels = l.in_channels;
        break;
    }
  }
}

}  // namespace

LayerGraph::LayerGraph(std::string name, InputShape input, std::vector<LayerDesc> layers)
    : name_(std::move(name)), input_(input), layers_(std::move(layers)) {
  if (input_.h <= 0 || input_.w <= 0 || input_.c <= 0) {
    throw DomainError("input shape must be positive");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerDesc& l = layers_[i];
    if (l.kind == LayerKind::Conv) conv_indices_.push_back(static_cast<int>(i));
    if (l.in_channels != channels_after(static_cast<int>(i) - 1)) {
      throw DomainError("layer " + std::to_string(i) + ": in_channels does not match predecessor");
    }
    if (l.out_channels <= 0 || l.out_spatial.h <= 0 || l.out_spatial.w <= 0) {
      throw DomainError("layer " + std::to_string(i) + ": empty output");
    }
  }
}

int LayerGraph::channels_after(int i) const {
  return i < 0 ? input_.c : layers_.at(static_cast<std::size_t>(i)).out_channels;
}

Extent LayerGraph::spatial_after(int i) const {
  return i < 0 ? Extent{input_.h, input_.w} : layers_.at(static_cast<std::size_t>(i)).out_spatial;
}

// ---------------------------------------------------------------------------

GraphBuilder::GraphBuilder(std::string name, InputShape input)
    : name_(std::move(name)), input_(input) {}

int GraphBuilder::channels() const { return layers_.empty() ? input_.c : layers_.back().out_channels; }

Extent GraphBuilder::spatial() const {
  return layers_.empty() ? Extent{input_.h, input_.w} : layers_.back().out_spatial;
}

GraphBuilder& GraphBuilder::conv(int kernel, int out_channels, int stride) {
  if (kernel <= 0 || out_channels <= 0 || stride <= 0) throw DomainError("conv: non-positive field");
  LayerDesc l;
  l.kind = LayerKind::Conv;
  l.kernel = {kernel, kernel};
  l.in_channels = channels();
  l.out_channels = out_channels;
  l.stride = stride;
  l.in_spatial = spatial();
  l.out_spatial = {(l.in_spatial.h + stride - 1) / stride, (l.in_spatial.w + stride - 1) / stride};
  l.block = open_block_;
  layers_.push_back(l);
  return *this;
}

GraphBuilder& GraphBuilder::pool(int kernel, int stride) {
  const Extent in = spatial();
  if (kernel <= 0 || stride <= 0) throw DomainError("pool: non-positive field");
  if (kernel > in.h || kernel > in.w) throw DomainError("pool: kernel larger than input");
  LayerDesc l;
  l.kind = LayerKind::Pool;
  l.kernel = {kernel, kernel};
  l.in_channels = channels();
  l.out_channels = l.in_channels;
  l.stride = stride;
  l.in_spatial = in;
  l.out_spatial = {(in.h - kernel) / stride + 1, (in.w - kernel) / stride + 1};
  l.block = open_block_;
  layers_.push_back(l);
  return *this;
}

GraphBuilder& GraphBuilder::global_pool() {
  const Extent in = spatial();
  LayerDesc l;
  l.kind = LayerKind::Pool;
  l.kernel = in;
  l.in_channels = channels();
  l.out_channels = l.in_channels;
  l.stride = 1;
  l.in_spatial = in;
  l.out_spatial = {1, 1};
  l.block = open_block_;
  layers_.push_back(l);
  return *this;
}

GraphBuilder& GraphBuilder::flatten() {
  LayerDesc l;
  l.kind = LayerKind::Flatten;
  l.in_channels = channels();
  l.in_spatial = spatial();
  l.out_channels = l.in_channels * l.in_spatial.h * l.in_spatial.w;
  l.out_spatial = {1, 1};
  l.block = open_block_;
  layers_.push_back(l);
  return *this;
}

GraphBuilder& GraphBuilder::fully_connected(int out_features) {
  if (out_features <= 0) throw DomainError("fc: non-positive width");
  LayerDesc l;
  l.kind = LayerKind::FullyConnected;
  l.in_channels = channels();
  l.in_spatial = spatial();
  l.out_channels = out_features;
  l.out_spatial = {1, 1};
  l.block = open_block_;
  layers_.push_back(l);
  return *this;
}

GraphBuilder& GraphBuilder::begin_block() {
  if (open_block_ >= 0) throw DomainError("residual blocks cannot nest");
  open_block_ = blocks_++;
  block_input_ = static_cast<int>(layers_.size()) - 1;
  return *this;
}

GraphBuilder& GraphBuilder::add() {
  if (open_block_ < 0) throw DomainError("add without an open residual block");
  if (static_cast<int>(layers_.size()) - 1 == block_input_) throw DomainError("empty residual block");
  LayerDesc l;
  l.kind = LayerKind::ResidualAdd;
  l.in_channels = channels();
  l.out_channels = l.in_channels;
  l.in_spatial = spatial();
  l.out_spatial = l.in_spatial;
  l.block = open_block_;
  l.skip_from = block_input_;
  l.skip_channels = block_input_ < 0 ? input_.c : layers_[block_input_].out_channels;
  l.skip_spatial = block_input_ < 0 ? Extent{input_.h, input_.w} : layers_[block_input_].out_spatial;
  layers_.push_back(l);
  open_block_ = -1;
  block_input_ = -1;
  return *this;
}

LayerGraph GraphBuilder::build() const {
  if (open_block_ >= 0) throw DomainError("unterminated residual block");
  return LayerGraph(name_, input_, layers_);
}

// ---------------------------------------------------------------------------

namespace {

int parse_int(const std::string& tok, std::size_t line, const char* field) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("bad ") + field + " '" + tok + "'", line);
  }
}

}  // namespace

LayerGraph parse_graph(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t lineno = 0;
  std::string name = "custom";
  std::optional<GraphBuilder> builder;
  InputShape input;

  while (std::getline(in, raw)) {
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    const std::string& kind = tok[0];
    if (kind == "name") {
      if (tok.size() != 2) throw ParseError("name takes one field", lineno);
      if (builder) throw ParseError("name must precede input", lineno);
      name = tok[1];
      continue;
    }
    if (kind == "input") {
      if (tok.size() != 4) throw ParseError("input takes H W C", lineno);
      if (builder) throw ParseError("duplicate input", lineno);
      input = {parse_int(tok[1], lineno, "height"), parse_int(tok[2], lineno, "width"),
               parse_int(tok[3], lineno, "channels")};
      if (input.h <= 0 || input.w <= 0 || input.c <= 0) throw ParseError("input must be positive", lineno);
      builder.emplace(name, input);
      continue;
    }
    if (!builder) throw ParseError("layer before input directive", lineno);
    try {
      if (kind == "block") {
        if (tok.size() != 1) throw ParseError("block takes no fields", lineno);
        builder->begin_block();
        continue;
      }
      if (tok.size() != 4) throw ParseError("expected: kind kernel channels stride", lineno);
      if (kind == "conv") {
        builder->conv(parse_int(tok[1], lineno, "kernel"), parse_int(tok[2], lineno, "channels"),
                      parse_int(tok[3], lineno, "stride"));
      } else if (kind == "pool") {
        const int k = parse_int(tok[1], lineno, "kernel");
        if (k == 0) {
          builder->global_pool();
        } else {
          builder->pool(k, parse_int(tok[3], lineno, "stride"));
        }
      } else if (kind == "fc") {
        builder->fully_connected(parse_int(tok[2], lineno, "channels"));
      } else if (kind == "flatten") {
        builder->flatten();
      } else if (kind == "add") {
        builder->add();
      } else {
        throw ParseError("unknown layer kind '" + kind + "'", lineno);
      }
    } catch (const DomainError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  if (!builder) throw ParseError("missing input directive");
  try {
    return builder->build();
  } catch (const DomainError& e) {
    throw ParseError(e.what(), lineno);
  }
}

LayerGraph load_graph(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw NotFound("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_graph(ss.str());
}

std::string format_graph(const LayerGraph& graph) {
  std::ostringstream out;
  out << "name " << graph.name() << "\n";
  out << "input " << graph.input_shape().h << " " << graph.input_shape().w << " "
      << graph.input_shape().c << "\n";
  int current_block = -1;
  for (const LayerDesc& l : graph.layers()) {
    if (l.block >= 0 && l.block != current_block) out << "block\n";
    current_block = l.block;
    switch (l.kind) {
      case LayerKind::Conv:
        out << "conv " << l.kernel.h << " " << l.out_channels << " " << l.stride << "\n";
        break;
      case LayerKind::Pool:
        if (l.out_spatial == Extent{1, 1} && l.kernel == l.in_spatial && l.stride == 1) {
          out << "pool 0 - -\n";
        } else {
          out << "pool " << l.kernel.h << " - " << l.stride << "\n";
        }
        break;
      case LayerKind::FullyConnected:
        out << "fc - " << l.out_channels << " -\n";
        break;
      case LayerKind::Flatten:
        out << "flatten - - -\n";
        break;
      case LayerKind::ResidualAdd:
        out << "add - - -\n";
        current_block = -1;
        break;
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------

void check_prune(const LayerGraph& graph, const PruneVector& prune, double r_max) {
  if (prune.rates.size() != graph.conv_count()) {
    throw DomainError("prune vector has " + std::to_string(prune.rates.size()) + " rates, graph has " +
                      std::to_string(graph.conv_count()) + " conv layers");
  }
  for (double r : prune.rates) {
    if (!(r >= 0.0 && r <= r_max)) {
      throw DomainError("pruning rate " + std::to_string(r) + " outside [0, " + std::to_string(r_max) + "]");
    }
  }
}

void check_plan(const LayerGraph& graph, const Plan& plan, double r_max) {
  if (plan.partition < 0 || plan.partition > static_cast<int>(graph.size())) {
    throw DomainError("partition " + std::to_string(plan.partition) + " outside [0, " +
                      std::to_string(graph.size()) + "]");
  }
  check_prune(graph, plan.prune, r_max);
}

int pruned_channels(int channels, double rate) {
  // The 1e-9 slack keeps products such as (1 - 0.1) * 10 = 9.000000000000002 at 9.
  const double kept = std::ceil((1.0 - rate) * channels - 1e-9);
  return std::max(1, static_cast<int>(kept));
}

LayerGraph apply_prune(const LayerGraph& graph, const PruneVector& prune, double r_max) {
  check_prune(graph, prune, r_max);
  std::vector<LayerDesc> layers = graph.layers();
  const auto& convs = graph.conv_indices();
  for (std::size_t k = 0; k < convs.size(); ++k) {
    LayerDesc& l = layers[convs[k]];
    l.out_channels = pruned_channels(l.out_channels, prune.rates[k]);
  }
  propagate_channels(layers, graph.input_shape());
  return LayerGraph(graph.name(), graph.input_shape(), std::move(layers));
}

std::uint64_t layer_flops(const LayerGraph& graph, std::size_t i) {
  const LayerDesc& l = graph.layer(i);
  using U = std::uint64_t;
  const U out_elems = U(l.out_channels) * U(l.out_spatial.h) * U(l.out_spatial.w);
  switch (l.kind) {
    case LayerKind::Conv:
      return 2 * U(l.kernel.h) * U(l.kernel.w) * U(l.in_channels) * out_elems;
    case LayerKind::FullyConnected: {
      const U fan_in = U(l.in_channels) * U(l.in_spatial.h) * U(l.in_spatial.w);
      return 2 * fan_in * U(l.out_channels);
    }
    case LayerKind::Pool:
      return U(l.kernel.h) * U(l.kernel.w) * out_elems;
    case LayerKind::Flatten:
      return out_elems;
    case LayerKind::ResidualAdd: {
      U flops = out_elems;
      if (l.skip_channels != l.out_channels || !(l.skip_spatial == l.out_spatial)) {
        flops += 2 * U(l.skip_channels) * out_elems;  // 1x1 projection on the skip path
      }
      return flops;
    }
  }
  return 0;
}

std::uint64_t range_flops(const LayerGraph& graph, std::size_t begin, std::size_t end) {
  std::uint64_t sum = 0;
  for (std::size_t i = begin; i < end && i < graph.size(); ++i) sum += layer_flops(graph, i);
  return sum;
}

std::uint64_t total_flops(const LayerGraph& graph) { return range_flops(graph, 0, graph.size()); }

std::uint64_t output_bytes(const LayerGraph& graph, std::size_t i) {
  const LayerDesc& l = graph.layer(i);
  return std::uint64_t(l.out_channels) * std::uint64_t(l.out_spatial.h) *
         std::uint64_t(l.out_spatial.w) * kBytesPerElement;
}

std::uint64_t input_bytes(const LayerGraph& graph) {
  const InputShape& s = graph.input_shape();
  return std::uint64_t(s.h) * std::uint64_t(s.w) * std::uint64_t(s.c) * kBytesPerElement;
}

std::uint64_t boundary_bytes(const LayerGraph& graph, int partition) {
  if (partition <= 0) return input_bytes(graph);
  if (partition >= static_cast<int>(graph.size())) return 0;
  return output_bytes(graph, static_cast<std::size_t>(partition - 1));
}

std::vector<int> partition_options(const LayerGraph& graph) {
  std::vector<int> options;
  const auto& layers = graph.layers();
  for (std::size_t p = 0; p < layers.size(); ++p) {
    if (p > 0) {
      const LayerDesc& prev = layers[p - 1];
      if (prev.block >= 0 && prev.kind != LayerKind::ResidualAdd) continue;
    }
    options.push_back(static_cast<int>(p));
  }
  return options;
}

}  // namespace splitprune
