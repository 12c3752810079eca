#include <gtest/gtest.h>

#include "pit/model.hpp"
#include "pit/rng.hpp"

using namespace pit;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor random_input(const NetworkSpec& spec, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Tensor x({n, spec.input_channels, spec.input_length});
  for (double& v : x.data()) v = rng.normal();
  return x;
}

LayerSpec conv(std::size_t c_out, std::size_t f, std::size_t stride = 1) {
  LayerSpec l;
  l.c_out = c_out;
  l.f_seed = f;
  l.stride = stride;
  l.activation = Activation::relu;
  return l;
}

LayerSpec head(std::size_t n) {
  LayerSpec l;
  l.kind = LayerKind::fc;
  l.c_out = n;
  l.searchable = false;
  return l;
}

}  // namespace

TEST(Network, SingleConvMaskSizes) {
  NetworkSpec spec;
  spec.input_length = 16;
  spec.outputs = 10;
  spec.blocks = {{{conv(4, 8), head(10)}, Residual::none}};
  NasModel model = NasModel::build(spec, 1);
  ASSERT_TRUE(model.layer(0, 0).masks.has_value());
  EXPECT_EQ(model.layer(0, 0).masks->alpha.numel(), 4u);
  EXPECT_EQ(model.layer(0, 0).masks->beta.numel(), 8u);
  EXPECT_EQ(model.layer(0, 0).masks->gamma.numel(), 3u);
  EXPECT_FALSE(model.layer(0, 1).masks.has_value());
  EXPECT_EQ(model.searchable_count(), 1u);
}

TEST(Network, EcgSeedTopology) {
  const NetworkSpec spec = builtin_seed("ecg_tcn");
  NasModel model = NasModel::build(spec, 1);
  EXPECT_EQ(model.searchable_count(), 7u);
  std::size_t pointwise = 0;
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) pointwise += model.skip(b).has_value();
  EXPECT_EQ(pointwise, 2u);
  Tensor y = model.forward(random_input(spec, 2, 3), {});
  EXPECT_EQ(y.shape(), (Shape{2, 5}));
}

TEST(Network, SynthSeed) {
  const NetworkSpec spec = builtin_seed("synth_small");
  NasModel model = NasModel::build(spec, 1);
  EXPECT_EQ(model.searchable_count(), 3u);
  for (std::size_t m = 0; m < 3; ++m) {
    EXPECT_EQ(spec.blocks[0].layers[m].c_out, 16u);
    EXPECT_EQ(spec.blocks[0].layers[m].f_seed, 16u);
  }
  EXPECT_THROW(builtin_seed("resnet"), ConfigError);
}

TEST(Network, ShapeErrorsNameTheLayer) {
  NetworkSpec spec;
  spec.input_length = 4;
  LayerSpec pool;
  pool.kind = LayerKind::avgpool;
  pool.f_seed = 8;
  spec.blocks = {{{conv(2, 3), pool, head(2)}, Residual::none}};
  try {
    propagate_shapes(spec);
    FAIL() << "expected a shape error";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("block0.layer1"), std::string::npos) << e.what();
  }
  spec.blocks = {{{conv(2, 3), conv(3, 3)}, Residual::identity}, {{head(2)}, Residual::none}};
  EXPECT_THROW(propagate_shapes(spec), ShapeError);
  spec.blocks = {{{conv(2, 3)}, Residual::none}};
  EXPECT_THROW(propagate_shapes(spec), ShapeError);
}

TEST(Network, ShapeTableMatchesRuntimeShapes) {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    NetworkSpec spec;
    spec.input_channels = 1 + rng.below(3);
    spec.input_length = 8 + rng.below(24);
    spec.outputs = 2 + rng.below(3);
    const std::size_t n_blocks = 1 + rng.below(3);
    std::size_t c = spec.input_channels;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      BlockSpec block;
      block.residual = static_cast<Residual>(rng.below(3));
      const std::size_t c_out = block.residual == Residual::identity ? c : 1 + rng.below(5);
      const std::size_t n_layers = 1 + rng.below(2);
      for (std::size_t m = 0; m < n_layers; ++m) {
        const std::size_t stride = block.residual == Residual::none ? 1 + rng.below(2) : 1;
        block.layers.push_back(conv(c_out, 1 + rng.below(6), stride));
      }
      c = c_out;
      spec.blocks.push_back(block);
    }
    spec.blocks.push_back({{head(spec.outputs)}, Residual::none});
    NasModel model = NasModel::build(spec, trial);
    std::vector<Tensor> trace;
    model.forward(random_input(spec, 2, trial), {}, &trace);
    std::size_t flat = 0;
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
      for (std::size_t m = 0; m < spec.blocks[b].layers.size(); ++m, ++flat) {
        const auto& s = model.shapes().layers[b][m];
        ASSERT_EQ(trace[flat].dim(1), s.c_out);
        ASSERT_EQ(trace[flat].dim(2), s.t_out);
      }
    }
  }
}

TEST(Network, MaskedForwardAtInitEqualsPlainForward) {
  for (const char* name : {"ecg_tcn", "synth_small"}) {
    const NetworkSpec spec = builtin_seed(name);
    NasModel model = NasModel::build(spec, 5);
    const Tensor x = random_input(spec, 3, 8);
    EXPECT_EQ(values(model.forward(x, {.use_masks = true})), values(model.forward(x, {.use_masks = false})));
  }
}

TEST(Network, EliminatedResidualLayersLeaveTheSkipPath) {
  NetworkSpec spec;
  spec.input_channels = 3;
  spec.input_length = 10;
  LayerSpec a = conv(3, 4), b = conv(3, 4);
  a.batchnorm = b.batchnorm = true;
  spec.blocks = {{{a, b}, Residual::identity}, {{head(2)}, Residual::none}};
  NasModel model = NasModel::build(spec, 2);
  for (std::size_t m = 0; m < 2; ++m) {
    for (double& v : model.layer(0, m).masks->alpha.data()) v = 0.0;
  }
  const Tensor x = random_input(spec, 2, 1);
  std::vector<Tensor> trace;
  model.forward(x, {}, &trace);
  EXPECT_EQ(values(trace[1]), values(x));
}

TEST(Network, SerializationRoundTrip) {
  const NetworkSpec spec = builtin_seed("ecg_tcn");
  const std::string text = serialize_network(spec);
  const NetworkSpec back = parse_network(IniDocument::parse(text));
  EXPECT_EQ(serialize_network(back), text);
  EXPECT_EQ(back.blocks.size(), spec.blocks.size());
  EXPECT_EQ(back.blocks[1].residual, Residual::pointwise);
}

TEST(Network, ParseRejectsUnknownKeysAndSections) {
  const std::string base =
      "[network]\ninput_channels = 1\ninput_length = 8\nhead = classification\nclasses = 2\n"
      "[block.0.layer.0]\nkind = conv1d\nc_out = 2\nf = 3\n"
      "[block.0.layer.1]\nkind = fc\nc_out = 2\nsearchable = false\n";
  EXPECT_NO_THROW(parse_network(IniDocument::parse(base)));
  EXPECT_THROW(parse_network(IniDocument::parse(base + "kernel = 3\n")), ConfigError);
  EXPECT_THROW(parse_network(IniDocument::parse(base + "[blocks.1]\n")), ConfigError);
  EXPECT_THROW(parse_network(IniDocument::parse("[network]\nseed = ecg_tcn\nwidth = 2\n")), ConfigError);
  EXPECT_EQ(parse_network(IniDocument::parse("[network]\nseed = synth_small\n")).input_length, 32u);
}

TEST(Network, CloneAndNamedTensorsRoundTrip) {
  const NetworkSpec spec = builtin_seed("ecg_tcn");
  NasModel a = NasModel::build(spec, 1);
  NasModel b = NasModel::build(spec, 2);
  b.load_named(a.named_tensors());
  const Tensor x = random_input(spec, 2, 4);
  EXPECT_EQ(values(a.forward(x, {})), values(b.forward(x, {})));
  NasModel c = a.clone();
  c.layer(0, 0).weight[0] += 1.0;
  EXPECT_NE(values(a.forward(x, {})), values(c.forward(x, {})));
}
