#include <gtest/gtest.h>

#include <random>

#include "splitprune/errors.hpp"
#include "splitprune/model_graph.hpp"

using namespace splitprune;

namespace {

std::size_t count_kind(const LayerGraph& g, LayerKind kind) {
  std::size_t n = 0;
  for (const LayerDesc& l : g.layers()) n += l.kind == kind ? 1 : 0;
  return n;
}

PruneVector random_prune(const LayerGraph& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> rate(0.0, kDefaultRateMax);
  PruneVector p = PruneVector::zeros(g.conv_count());
  for (double& r : p.rates) r = rate(rng);
  return p;
}

void expect_channel_consistency(const LayerGraph& g) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    const LayerDesc& l = g.layer(i);
    const int prev = g.channels_after(static_cast<int>(i) - 1);
    if (l.kind == LayerKind::ResidualAdd) {
      EXPECT_EQ(l.skip_channels, g.channels_after(l.skip_from)) << "layer " << i;
      EXPECT_EQ(l.in_channels, prev) << "layer " << i;
    } else if (l.kind == LayerKind::Flatten) {
      EXPECT_EQ(l.in_channels, prev);
    } else {
      EXPECT_EQ(l.in_channels, prev) << "layer " << i;
    }
    EXPECT_GT(l.out_channels, 0);
  }
}

}  // namespace

TEST(Presets, PaperArchitectures) {
  const LayerGraph vgg16 = preset("vgg16");
  EXPECT_EQ(vgg16.conv_count(), 13u);
  EXPECT_EQ(vgg16.input_shape(), (InputShape{320, 320, 3}));
  EXPECT_EQ(count_kind(vgg16, LayerKind::FullyConnected), 1u);

  const LayerGraph vgg19 = preset("vgg19");
  EXPECT_EQ(vgg19.conv_count(), 16u);
  EXPECT_EQ(vgg19.input_shape(), (InputShape{320, 320, 3}));

  const LayerGraph resnet = preset("resnet34");
  EXPECT_EQ(resnet.conv_count(), 33u);
  EXPECT_EQ(resnet.input_shape(), (InputShape{320, 320, 3}));
  EXPECT_EQ(count_kind(resnet, LayerKind::FullyConnected), 1u);
  EXPECT_EQ(count_kind(resnet, LayerKind::ResidualAdd), 16u);
}

TEST(Presets, Toys) {
  const LayerGraph toy3 = preset("toy3");
  EXPECT_EQ(toy3.conv_count(), 3u);
  EXPECT_EQ(toy3.input_shape(), (InputShape{32, 32, 3}));
  EXPECT_EQ(preset("toy4").conv_count(), 4u);
  EXPECT_EQ(partition_options(toy3).size(), 4u);
}

TEST(Presets, UnknownNameListsValidOnes) {
  try {
    preset("alexnet");
    FAIL() << "expected NotFound";
  } catch (const NotFound& e) {
    const std::string msg = e.what();
    for (const std::string& name : preset_names()) EXPECT_NE(msg.find(name), std::string::npos) << name;
  }
}

TEST(Presets, TextRoundTrip) {
  for (const std::string& name : preset_names()) {
    const LayerGraph g = preset(name);
    EXPECT_EQ(parse_graph(format_graph(g)), g) << name;
    EXPECT_EQ(parse_graph(preset_text(name)), g) << name;
  }
}

TEST(Presets, ConvIndicesIdentifyConvLayers) {
  for (const std::string& name : preset_names()) {
    const LayerGraph g = preset(name);
    std::vector<int> expected;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g.layer(i).kind == LayerKind::Conv) expected.push_back(static_cast<int>(i));
    }
    EXPECT_EQ(g.conv_indices(), expected) << name;
  }
}

TEST(ParseGraph, ReportsLineNumbers) {
  try {
    parse_graph("name bad\ninput 8 8 3\nconv 3 x 1\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_graph("name x\ninput 8 8 3\nwarp 3 4 1\n"), ParseError);
  EXPECT_THROW(parse_graph("name x\nconv 3 4 1\n"), ParseError);
}

TEST(ParseGraph, CommentsAndBlankLines) {
  const LayerGraph g = parse_graph(
      "# tiny\nname tiny\ninput 8 8 3\n\nconv 3 4 1   # first\npool 2 - 2\nfc - 10 -\n");
  EXPECT_EQ(g.size(), 3u);
  EXPECT_EQ(g.layer(1).out_spatial, (Extent{4, 4}));
  EXPECT_EQ(g.layer(2).out_channels, 10);
}

TEST(ApplyPrune, ZeroRatesIsIdentity) {
  const LayerGraph g = preset("toy3");
  EXPECT_EQ(apply_prune(g, PruneVector::zeros(3)), g);
}

TEST(ApplyPrune, CeilRule) {
  EXPECT_EQ(pruned_channels(64, 0.5), 32);
  EXPECT_EQ(pruned_channels(64, 0.9), 7);  // ceil(6.4)
  EXPECT_EQ(pruned_channels(1, 0.9), 1);
  EXPECT_EQ(pruned_channels(10, 0.9), 1);
  EXPECT_EQ(pruned_channels(3, 0.0), 3);
}

TEST(ApplyPrune, HalvesChannelsAndPropagates) {
  const LayerGraph g = GraphBuilder("two", {16, 16, 3}).conv(3, 64).conv(3, 32).fully_connected(10).build();
  const LayerGraph p = apply_prune(g, PruneVector{{0.5, 0.0}});
  EXPECT_EQ(p.layer(0).out_channels, 32);
  EXPECT_EQ(p.layer(1).in_channels, 32);
  EXPECT_EQ(p.layer(1).out_channels, 32);
  EXPECT_EQ(p.layer(0).out_spatial, g.layer(0).out_spatial);
}

TEST(ApplyPrune, RejectsOutOfRange) {
  const LayerGraph g = preset("toy3");
  EXPECT_THROW(apply_prune(g, PruneVector{{0.0, 0.95, 0.0}}), DomainError);
  EXPECT_THROW(apply_prune(g, PruneVector{{-0.1, 0.0, 0.0}}), DomainError);
  EXPECT_THROW(apply_prune(g, PruneVector{{0.0, 0.0}}), DomainError);
}

TEST(ApplyPrune, ChannelConsistencyOnRandomVectors) {
  std::mt19937_64 rng(11);
  for (const std::string& name : preset_names()) {
    const LayerGraph g = preset(name);
    for (int trial = 0; trial < 20; ++trial) {
      const LayerGraph p = apply_prune(g, random_prune(g, rng));
      expect_channel_consistency(p);
      for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_EQ(p.layer(i).out_spatial, g.layer(i).out_spatial);
        if (g.layer(i).kind == LayerKind::Conv) {
          EXPECT_LE(layer_flops(p, i), layer_flops(g, i)) << name << " layer " << i;
        }
      }
    }
  }
}

TEST(ApplyPrune, RaisingOneRateNeverIncreasesFlops) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const std::string& name : {"toy3", "toy4", "vgg16", "resnet34"}) {
    const LayerGraph g = preset(name);
    for (int trial = 0; trial < 30; ++trial) {
      PruneVector p = random_prune(g, rng);
      const std::uint64_t before = total_flops(apply_prune(g, p));
      const std::size_t k = static_cast<std::size_t>(unit(rng) * static_cast<double>(g.conv_count()));
      p.rates[k] += (kDefaultRateMax - p.rates[k]) * unit(rng);
      EXPECT_LE(total_flops(apply_prune(g, p)), before) << name;
    }
  }
}

TEST(Flops, WorkedExamples) {
  const LayerGraph conv = GraphBuilder("c", {320, 320, 3}).conv(3, 64).build();
  EXPECT_EQ(layer_flops(conv, 0), 353'894'400u);  // 2*9*3*64*320*320

  const LayerGraph fc = GraphBuilder("f", {1, 1, 512}).fully_connected(10).build();
  EXPECT_EQ(layer_flops(fc, 0), 10'240u);
}

TEST(Flops, MinimumOneChannelKeepsWork) {
  const LayerGraph g = GraphBuilder("c", {8, 8, 3}).conv(3, 4).build();
  const LayerGraph p = apply_prune(g, PruneVector{{0.9}});
  EXPECT_EQ(p.layer(0).out_channels, 1);
  EXPECT_GT(layer_flops(p, 0), 0u);
}

TEST(Flops, PartitionSplitsWorkExactly) {
  for (const std::string& name : preset_names()) {
    const LayerGraph g = preset(name);
    const std::uint64_t total = total_flops(g);
    for (std::size_t p = 0; p <= g.size(); ++p) {
      EXPECT_EQ(range_flops(g, 0, p) + range_flops(g, p, g.size()), total) << name << " p=" << p;
    }
  }
}

TEST(Bytes, WorkedExamples) {
  const LayerGraph g = GraphBuilder("b", {320, 320, 3}).conv(3, 64, 2).build();
  EXPECT_EQ(output_bytes(g, 0), 6'553'600u);  // 64*160*160*4
  EXPECT_EQ(boundary_bytes(preset("vgg16"), 0), 1'228'800u);
  EXPECT_EQ(input_bytes(preset("vgg16")), 1'228'800u);
  EXPECT_EQ(boundary_bytes(preset("toy3"), 2), 16'384u);
  EXPECT_EQ(boundary_bytes(preset("toy3"), 4), 0u);
}

TEST(PartitionOptions, NeverInsideResidualBlocks) {
  const LayerGraph g = preset("resnet34");
  const std::vector<int> opts = partition_options(g);
  for (int p : opts) {
    ASSERT_GE(p, 0);
    ASSERT_LT(p, static_cast<int>(g.size()));
    if (p > 0 && p < static_cast<int>(g.size())) {
      const int before = g.layer(static_cast<std::size_t>(p - 1)).block;
      const int after = g.layer(static_cast<std::size_t>(p)).block;
      EXPECT_FALSE(before >= 0 && before == after) << "cut " << p << " splits block " << before;
    }
  }
  EXPECT_EQ(opts.front(), 0);
}

TEST(PartitionOptions, PlainNetsUseEveryInteriorBoundary) {
  const LayerGraph g = preset("vgg16");
  const std::vector<int> opts = partition_options(g);
  ASSERT_EQ(opts.size(), g.size());
  for (std::size_t i = 0; i < opts.size(); ++i) EXPECT_EQ(opts[i], static_cast<int>(i));
}

TEST(ResidualBlocks, ProjectionCountedWhenShapesDiffer) {
  const LayerGraph same = GraphBuilder("s", {8, 8, 4}).begin_block().conv(3, 4).conv(3, 4).add().build();
  const LayerGraph wide = GraphBuilder("w", {8, 8, 4}).begin_block().conv(3, 8).conv(3, 8).add().build();
  EXPECT_EQ(layer_flops(same, 2), 4u * 8 * 8);
  EXPECT_EQ(layer_flops(wide, 2), 8u * 8 * 8 + 2u * 4 * 8 * 8 * 8);
  // Pruning the second conv makes the skip path need a projection.
  const LayerGraph pruned = apply_prune(same, PruneVector{{0.0, 0.5}});
  EXPECT_EQ(pruned.layer(2).out_channels, 2);
  EXPECT_GT(layer_flops(pruned, 2), 2u * 8 * 8);
}
