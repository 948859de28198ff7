#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace splitprune {

inline constexpr double kDefaultRateMax = 0.9;
inline constexpr std::uint64_t kBytesPerElement = 4;

enum class LayerKind { Conv, Pool, FullyConnected, ResidualAdd, Flatten };

std::string_view to_string(LayerKind kind);

struct Extent {
  int h = 1;
  int w = 1;

  friend bool operator==(const Extent&, const Extent&) = default;
};

struct InputShape {
  int h = 0;
  int w = 0;
  int c = 0;

  friend bool operator==(const InputShape&, const InputShape&) = default;
};

// One layer of the flattened network. Shapes only, no weights.
//
// Conv uses "same" padding (k/2) so out = ceil(in / stride). Pool uses no
// padding; a kernel of 0 in the text format means global pooling.
// FullyConnected flattens its input implicitly: fan_in = in_channels * in_spatial.
// Flatten reports out_channels = C*H*W with a 1x1 spatial extent.
struct LayerDesc {
  LayerKind kind = LayerKind::Conv;
  Extent kernel;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  Extent in_spatial;
  Extent out_spatial;
  // Residual block membership, -1 outside any block.
  int block = -1;
  // ResidualAdd only: index of the layer whose output feeds the skip path (-1 = graph input).
  int skip_from = -1;
  int skip_channels = 0;
  Extent skip_spatial;

  friend bool operator==(const LayerDesc&, const LayerDesc&) = default;
};

struct PruneVector {
  std::vector<double> rates;

  static PruneVector zeros(std::size_t n) { return PruneVector{std::vector<double>(n, 0.0)}; }

  friend bool operator==(const PruneVector&, const PruneVector&) = default;
};

// partition = p means layers [0, p) execute on the edge device and [p, end) in the cloud.
struct Plan {
  int partition = 0;
  PruneVector prune;

  friend bool operator==(const Plan&, const Plan&) = default;
};

class LayerGraph {
 public:
  LayerGraph() = default;
  LayerGraph(std::string name, InputShape input, std::vector<LayerDesc> layers);

  const std::string& name() const noexcept { return name_; }
  const InputShape& input_shape() const noexcept { return input_; }
  const std::vector<LayerDesc>& layers() const noexcept { return layers_; }
  const LayerDesc& layer(std::size_t i) const { return layers_.at(i); }
  std::size_t size() const noexcept { return layers_.size(); }
  const std::vector<int>& conv_indices() const noexcept { return conv_indices_; }
  std::size_t conv_count() const noexcept { return conv_indices_.size(); }

  // Channel count and spatial size of the tensor leaving layer i; i = -1 is the graph input.
  int channels_after(int i) const;
  Extent spatial_after(int i) const;

  friend bool operator==(const LayerGraph&, const LayerGraph&) = default;

 private:
  std::string name_;
  InputShape input_;
  std::vector<LayerDesc> layers_;
  std::vector<int> conv_indices_;
};

// Incremental construction with shape inference.
class GraphBuilder {
 public:
  GraphBuilder(std::string name, InputShape input);

  GraphBuilder& conv(int kernel, int out_channels, int stride = 1);
  GraphBuilder& pool(int kernel, int stride);
  GraphBuilder& global_pool();
  GraphBuilder& flatten();
  GraphBuilder& fully_connected(int out_features);
  // Opens a residual block; the next add() closes it.
  GraphBuilder& begin_block();
  GraphBuilder& add();

  LayerGraph build() const;

 private:
  int channels() const;
  Extent spatial() const;

  std::string name_;
  InputShape input_;
  std::vector<LayerDesc> layers_;
  int open_block_ = -1;
  int block_input_ = -1;
  int blocks_ = 0;
};

// Compiled-in presets: vgg16, vgg19, resnet34 (320x320x3), toy3, toy4 (32x32x3).
LayerGraph preset(std::string_view name);
std::vector<std::string> preset_names();
std::string preset_text(std::string_view name);

// Text format, one directive per line ('#' starts a comment):
//   name <text>
//   input <H> <W> <C>
//   block                      opens a residual block
//   <kind> <kernel> <channels> <stride>   kind in conv|pool|fc|flatten|add, '-' for unused fields
LayerGraph parse_graph(std::string_view text);
LayerGraph load_graph(const std::string& path);
std::string format_graph(const LayerGraph& graph);

// Rates must lie in [0, r_max]; length must equal conv_count().
void check_prune(const LayerGraph& graph, const PruneVector& prune, double r_max = kDefaultRateMax);
void check_plan(const LayerGraph& graph, const Plan& plan, double r_max = kDefaultRateMax);

int pruned_channels(int channels, double rate);

LayerGraph apply_prune(const LayerGraph& graph, const PruneVector& prune,
                       double r_max = kDefaultRateMax);

std::uint64_t layer_flops(const LayerGraph& graph, std::size_t i);
std::uint64_t total_flops(const LayerGraph& graph);
// Sum of layer_flops over [begin, end).
std::uint64_t range_flops(const LayerGraph& graph, std::size_t begin, std::size_t end);

std::uint64_t output_bytes(const LayerGraph& graph, std::size_t i);
std::uint64_t input_bytes(const LayerGraph& graph);
// Bytes of the tensor crossing the boundary at `partition` (raw input for 0, 0 past the last layer).
std::uint64_t boundary_bytes(const LayerGraph& graph, int partition);

// Layer boundaries the planner may cut at: every boundary outside a residual block,
// excluding the all-edge position size().
std::vector<int> partition_options(const LayerGraph& graph);

}  // namespace splitprune
