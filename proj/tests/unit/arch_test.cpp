#include <gtest/gtest.h>

#include <cmath>

#include "pit/arch.hpp"
#include "pit/oracles.hpp"
#include "pit/rng.hpp"

using namespace pit;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

LayerSpec conv(std::size_t c_out, std::size_t f, bool bn = false) {
  LayerSpec l;
  l.c_out = c_out;
  l.f_seed = f;
  l.batchnorm = bn;
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

NetworkSpec single_conv(std::size_t c_in, std::size_t c_out, std::size_t f, std::size_t t) {
  NetworkSpec spec;
  spec.input_channels = c_in;
  spec.input_length = t;
  spec.blocks = {{{conv(c_out, f), head(2)}, Residual::none}};
  return spec;
}

// Mask parameters whose binarization keeps taps below `fb` and applies
// `zeros` dilation doublings.
void set_taps(MaskSet& set, std::size_t fb, std::size_t zeros) {
  for (std::size_t q = 0; q < set.f_seed(); ++q) set.beta[q] = q < fb ? 1.0 : 0.0;
  for (std::size_t q = 0; q < set.len_gamma; ++q) set.gamma[q] = q + zeros < set.len_gamma ? 1.0 : 0.0;
}

void randomize_masks(NasModel& model, Rng& rng) {
  for (auto& p : model.mask_params()) {
    for (std::size_t i = p.frozen_prefix; i < p.tensor.numel(); ++i) {
      p.tensor[i] = rng.uniform() < 0.35 ? rng.uniform(-0.45, 0.45) : rng.uniform(0.55, 1.2);
    }
  }
}

void randomize_batchnorm(NasModel& model, Rng& rng) {
  for (std::size_t b = 0; b < model.spec().blocks.size(); ++b) {
    for (std::size_t m = 0; m < model.spec().blocks[b].layers.size(); ++m) {
      auto& p = model.layer(b, m);
      if (!p.bn_weight.defined()) continue;
      for (double& v : p.bn_shift.data()) v = rng.uniform(-0.5, 0.5);
      for (double& v : p.bias.data()) v = rng.uniform(-0.5, 0.5);
      for (double& v : p.bn_stats.running_mean) v = rng.uniform(-0.5, 0.5);
      for (double& v : p.bn_stats.running_var) v = rng.uniform(0.5, 2.0);
    }
  }
}

}  // namespace

TEST(Extract, SeedLayerKeepsEverything) {
  NasModel model = NasModel::build(single_conv(1, 3, 9, 12), 1);
  const EffectiveArch arch = extract(model);
  const ArchLayer& L = arch.layers[0];
  EXPECT_EQ(L.dilation, 1u);
  EXPECT_EQ(L.receptive_field, 9u);
  EXPECT_EQ(L.kernel_size, 9u);
  EXPECT_EQ(L.kept_channels, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_FALSE(L.eliminated);
}

TEST(Extract, DilationAndReceptiveFieldPatterns) {
  NasModel model = NasModel::build(single_conv(1, 3, 9, 12), 1);
  MaskSet& set = *model.layer(0, 0).masks;
  set.gamma[3] = 0.1;
  EffectiveArch arch = extract(model);
  EXPECT_EQ(arch.layers[0].dilation, 2u);
  EXPECT_EQ(arch.layers[0].receptive_field, 9u);
  EXPECT_EQ(arch.layers[0].kernel_size, 5u);
  for (std::size_t q = 5; q < 9; ++q) set.beta[q] = 0.0;
  set.beta[4] = 0.0;
  set.beta[3] = 0.6;
  for (std::size_t q = 1; q < 3; ++q) set.beta[q] = 0.0;
  arch = extract(model);
  EXPECT_EQ(arch.layers[0].kept_taps, (std::vector<std::size_t>{0, 2}));
  set.beta[4] = 0.6;
  arch = extract(model);
  EXPECT_EQ(arch.layers[0].kept_taps, (std::vector<std::size_t>{0, 2, 4}));
  EXPECT_EQ(arch.layers[0].receptive_field, 5u);
  EXPECT_EQ(arch.layers[0].kernel_size, 3u);
}

TEST(Count, LayerExamples) {
  NetworkSpec spec = single_conv(2, 4, 3, 10);
  NasModel model = NasModel::build(spec, 1);
  const EffectiveArch arch = extract(model);
  EXPECT_EQ(arch.layers[0].c_in * arch.layers[0].c_out * arch.layers[0].kernel_size, 24u);
  EXPECT_EQ(arch.layers[1].c_in, 40u);
  EXPECT_EQ(arch.params_weights_only, 24u + 80u);
  EXPECT_EQ(arch.macs, 240u + 80u);
  EXPECT_EQ(arch.params_with_bias, 104u + 4u + 2u);

  NetworkSpec fc;
  fc.input_channels = 16;
  fc.input_length = 1;
  fc.outputs = 5;
  fc.blocks = {{{head(5)}, Residual::none}};
  const EffectiveArch a = extract(NasModel::build(fc, 1));
  EXPECT_EQ(a.params_weights_only, 80u);
  EXPECT_EQ(a.macs, 80u);
}

TEST(Materialize, SeedEqualCopyIsIdentical) {
  NasModel model = NasModel::build(builtin_seed("ecg_tcn"), 3);
  Rng rng(1);
  randomize_batchnorm(model, rng);
  const EffectiveArch arch = extract(model);
  ConcreteModel pruned = materialize(model, arch);
  EXPECT_EQ(pruned.count().weights, arch.params_weights_only);
  const auto names = model.named_tensors();
  const auto copied = pruned.named_tensors();
  for (const auto& [name, t] : copied) {
    const auto it = std::find_if(names.begin(), names.end(), [&](const auto& p) { return p.first == name; });
    ASSERT_NE(it, names.end()) << name;
    EXPECT_EQ(values(t), values(it->second)) << name;
  }
  const EquivalenceReport r = verify_equivalence(model, pruned, 20);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.max_abs_diff, 0.0);
}

TEST(Materialize, PrunedChannelsDropDownstreamSlices) {
  NetworkSpec spec;
  spec.input_length = 8;
  spec.blocks = {{{conv(4, 3), conv(3, 3), head(2)}, Residual::none}};
  NasModel model = NasModel::build(spec, 1);
  model.layer(0, 0).masks->alpha[1] = 0.0;
  model.layer(0, 0).masks->alpha[3] = 0.2;
  ConcreteModel pruned = materialize(model, extract(model));
  const auto& layers = pruned.blocks()[0].layers;
  EXPECT_EQ(layers[0].weight.shape(), (Shape{2, 1, 3}));
  EXPECT_EQ(layers[1].weight.shape(), (Shape{3, 2, 3}));
  // the second layer keeps the slices over seed inputs 0 and 2
  for (std::size_t m = 0; m < 3; ++m) {
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(layers[1].weight[(m * 2 + 1) * 3 + i], model.layer(0, 1).weight[(m * 4 + 2) * 3 + i]);
    }
  }
  EXPECT_TRUE(verify_equivalence(model, pruned, 50).passed);
}

TEST(Materialize, EliminatedResidualBlockIsTheSkipPath) {
  NetworkSpec spec;
  spec.input_channels = 2;
  spec.input_length = 12;
  spec.blocks = {{{conv(3, 3, true)}, Residual::none},
                 {{conv(3, 5, true), conv(3, 5, true)}, Residual::identity},
                 {{head(2)}, Residual::none}};
  NasModel model = NasModel::build(spec, 4);
  for (double& v : model.layer(1, 1).masks->alpha.data()) v = 0.0;
  const EffectiveArch arch = extract(model);
  EXPECT_TRUE(arch.layers[2].eliminated);
  EXPECT_EQ(arch.layers[2].c_out, 0u);
  ConcreteModel pruned = materialize(model, arch);
  EXPECT_EQ(pruned.blocks()[1].layers[1].weight.numel(), 0u);
  std::vector<Tensor> trace;
  Tensor x({2, 2, 12});
  Rng rng(3);
  for (double& v : x.data()) v = rng.normal();
  pruned.forward(x, {}, &trace);
  EXPECT_EQ(values(trace[2]), values(trace[0]));
  EXPECT_TRUE(verify_equivalence(model, pruned, 50).passed);
}

TEST(Materialize, EquivalenceOnRandomMasks) {
  Rng rng(77);
  for (const char* name : {"ecg_tcn", "synth_small"}) {
    NasModel model = NasModel::build(builtin_seed(name), 9);
    randomize_batchnorm(model, rng);
    for (int trial = 0; trial < 15; ++trial) {
      randomize_masks(model, rng);
      const MaskTable masks = model.compute_mask_table();
      const EffectiveArch arch = extract(model, masks);
      ConcreteModel pruned = materialize(model, arch);
      const EquivalenceReport r = verify_equivalence(model, pruned, 8, 1e-5, trial);
      ASSERT_TRUE(r.passed) << name << " trial " << trial << " diff " << r.max_abs_diff << " at "
                            << r.failing_layer.value_or("?");
      const IntegerCosts from_masks = integer_costs(model, masks);
      EXPECT_EQ(pruned.count(), from_masks);
      EXPECT_EQ(count(arch), from_masks);
      EXPECT_EQ(pruned.arch(), arch);
    }
  }
}

TEST(Materialize, CorruptedCopyIsLocalized) {
  NasModel model = NasModel::build(builtin_seed("ecg_tcn"), 2);
  ConcreteModel pruned = materialize(model, extract(model));
  pruned.blocks()[2].layers[0].weight[5] += 0.5;
  const EquivalenceReport r = verify_equivalence(model, pruned, 10);
  EXPECT_FALSE(r.passed);
  ASSERT_TRUE(r.failing_layer.has_value());
  EXPECT_EQ(*r.failing_layer, "block2.layer0");
}

TEST(Materialize, MatchesShrunkLayerOracleExhaustively) {
  const std::size_t c_in = 2, c_seed = 4, f_seed = 8, t = 20;
  NasModel model = NasModel::build(single_conv(c_in, c_seed, f_seed, t), 5);
  auto& p = model.layer(0, 0);
  for (std::size_t m = 0; m < c_seed; ++m) p.bias[m] = 0.1 * static_cast<double>(m + 1);
  Tensor x({3, c_in, t});
  Rng rng(12);
  for (double& v : x.data()) v = rng.normal();
  const std::vector<double> xs = values(x);
  std::size_t checked = 0;
  for (std::size_t subset = 1; subset < (1u << c_seed); ++subset) {
    std::vector<std::size_t> channels;
    for (std::size_t m = 0; m < c_seed; ++m) {
      const bool keep = (subset >> m) & 1;
      p.masks->alpha[m] = keep ? 1.0 : 0.0;
      if (keep) channels.push_back(m);
    }
    for (std::size_t fb = 1; fb <= f_seed; ++fb) {
      for (std::size_t zeros = 0; zeros < 3; ++zeros) {
        set_taps(*p.masks, fb, zeros);
        const EffectiveArch arch = extract(model);
        const ArchLayer& L = arch.layers[0];
        const oracle::PlainConv ref = oracle::shrunk_layer(values(p.weight), values(p.bias), c_seed, c_in, f_seed,
                                                           channels, L.receptive_field, L.dilation);
        ASSERT_EQ(ref.k, L.kernel_size);
        std::vector<Tensor> trace;
        model.forward(x, {}, &trace);
        std::vector<double> want =
            oracle::reference_conv(xs, 3, c_in, t, ref.weight, ref.c_out, ref.k, ref.bias, 1, ref.dilation);
        for (double& v : want) v = std::max(v, 0.0);
        // masked trace is in seed layout: compare kept channels only, others must be zero
        for (std::size_t n = 0; n < 3; ++n) {
          for (std::size_t m = 0, a = 0; m < c_seed; ++m) {
            const bool kept = a < channels.size() && channels[a] == m;
            for (std::size_t s = 0; s < t; ++s) {
              const double got = trace[0][(n * c_seed + m) * t + s];
              const double expect = kept ? want[(n * channels.size() + a) * t + s] : 0.0;
              ASSERT_NEAR(got, expect, 1e-9);
            }
            a += kept;
          }
        }
        ConcreteModel pruned = materialize(model, arch);
        ASSERT_TRUE(verify_equivalence(model, pruned, 4, 1e-5).passed);
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 15u * 8u * 3u);
}

TEST(Arch, SerializationRoundTrip) {
  NasModel model = NasModel::build(builtin_seed("ecg_tcn"), 1);
  Rng rng(5);
  randomize_masks(model, rng);
  const EffectiveArch arch = extract(model);
  const EffectiveArch back = parse_arch(IniDocument::parse(serialize_arch(arch)));
  EXPECT_EQ(back, arch);
  EXPECT_EQ(count(back).weights, arch.params_weights_only);
  EXPECT_NE(format_arch_table(arch).find("block0.layer0"), std::string::npos);
}

TEST(Enumerate, SingleLayerAgainstFormula) {
  NetworkSpec spec = single_conv(1, 4, 4, 8);
  const SearchSpaceCount c = enumerate_search_space(spec, 1000000);
  EXPECT_EQ(c.exact, 20u);
  EXPECT_EQ(c.formula, 32.0);
}

TEST(Enumerate, LayerChoicesMatchBruteForce) {
  for (std::size_t f = 1; f <= 40; ++f) {
    EXPECT_EQ(layer_choices(3, f).size(), oracle::layer_configurations_bruteforce(3, f)) << "f=" << f;
  }
  EXPECT_EQ(layer_choices(5, 1).size(), 5u);
}

TEST(Enumerate, VisitsEveryArchitectureOnce) {
  NetworkSpec spec;
  spec.input_length = 8;
  spec.blocks = {{{conv(2, 4), conv(3, 3), head(2)}, Residual::none}};
  std::set<std::vector<LayerChoice>> seen;
  const SearchSpaceCount c =
      enumerate_search_space(spec, 1000000, [&](const std::vector<LayerChoice>& a) { seen.insert(a); });
  EXPECT_EQ(c.exact, seen.size());
  EXPECT_EQ(c.exact, c.per_layer[0] * c.per_layer[1]);
}

TEST(Enumerate, CapAndLargeFormula) {
  EXPECT_THROW(enumerate_search_space(builtin_seed("synth_small"), 1000), CapExceeded);
  try {
    enumerate_search_space(builtin_seed("synth_small"), 1000);
  } catch (const CapExceeded& e) {
    EXPECT_GT(e.bound(), 1000u);
  }
  const double f = search_space_formula(std::vector<std::pair<std::size_t, std::size_t>>(8, {128, 17}));
  EXPECT_NEAR(std::log10(f), 32.29, 0.01);
  EXPECT_NEAR(search_space_formula(std::vector<std::pair<std::size_t, std::size_t>>(3, {16, 16})), 1073741824.0, 0.5);
}
