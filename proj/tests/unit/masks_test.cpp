#include <gtest/gtest.h>

#include <cmath>

#include "grad_check.hpp"
#include "pit/masks.hpp"
#include "pit/ops.hpp"
#include "pit/rng.hpp"

using namespace pit;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Aggregated dilation mask computed straight from the definition: Gamma_m is
// the sum of |gamma_q| for q >= m, tap i reads Gamma at k(i).
std::vector<double> gamma_soft_by_definition(const std::vector<double>& gamma, std::size_t f) {
  const std::size_t len = gamma.size();
  std::vector<double> out(f);
  for (std::size_t i = 0; i < f; ++i) {
    std::size_t k = 0;
    for (std::size_t p = 1; p < len; ++p) k += (i % (std::size_t{1} << p)) != 0;
    double s = 0.0;
    for (std::size_t q = k; q < len; ++q) s += std::fabs(gamma[q]);
    out[i] = s;
  }
  return out;
}

}  // namespace

TEST(CBeta, UpperTriangularOnes) {
  EXPECT_EQ(values(build_c_beta(3)), (std::vector<double>{1, 1, 1, 0, 1, 1, 0, 0, 1}));
  EXPECT_EQ(values(build_c_beta(1)), (std::vector<double>{1}));
  const Tensor c9 = build_c_beta(9);
  for (std::size_t i = 0; i < 9; ++i) {
    for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(c9[i * 9 + j], j >= i ? 1.0 : 0.0);
  }
  EXPECT_THROW(build_c_beta(0), std::invalid_argument);
}

TEST(KMap, Examples) {
  const KMap k9 = build_k_map(9);
  EXPECT_EQ(k9.len_gamma, 4u);
  EXPECT_EQ(k9.k, (std::vector<std::size_t>{0, 3, 2, 3, 1, 3, 2, 3, 0}));
  const KMap k2 = build_k_map(2);
  EXPECT_EQ(k2.len_gamma, 1u);
  EXPECT_EQ(k2.k, (std::vector<std::size_t>{0, 0}));
  for (std::size_t f = 2; f <= 64; ++f) {
    const KMap km = build_k_map(f);
    EXPECT_EQ(km.k[0], 0u);
    for (std::size_t i = 1; i < f; i += 2) EXPECT_EQ(km.k[i], km.len_gamma - 1);
    for (std::size_t v : km.k) EXPECT_LT(v, km.len_gamma);
  }
}

TEST(CGamma, RowsFollowKMap) {
  const Tensor c = build_c_gamma(9);
  const auto row = [&](std::size_t i) { return std::vector<double>(c.data().begin() + i * 4, c.data().begin() + i * 4 + 4); };
  EXPECT_EQ(row(0), (std::vector<double>{1, 1, 1, 1}));
  EXPECT_EQ(row(1), (std::vector<double>{0, 0, 0, 1}));
  EXPECT_EQ(row(4), (std::vector<double>{0, 1, 1, 1}));
  EXPECT_EQ(row(8), (std::vector<double>{1, 1, 1, 1}));
}

TEST(CGamma, AgreesWithAggregationDefinition) {
  Rng rng(4);
  for (std::size_t f = 2; f <= 64; ++f) {
    MaskSet set = MaskSet::create(1, f);
    for (double& v : set.gamma.data()) v = rng.uniform(-1.0, 1.0);
    const auto got = values(compute_masks(set).g_soft);
    const auto want = gamma_soft_by_definition(values(set.gamma), f);
    for (std::size_t i = 0; i < f; ++i) EXPECT_NEAR(got[i], want[i], 1e-12) << "f=" << f << " i=" << i;
  }
}

TEST(ComputeMasks, InitialisationKeepsEverything) {
  const MaskOutputs out = compute_masks(MaskSet::create(4, 9));
  EXPECT_EQ(values(out.a_bin), std::vector<double>(4, 1.0));
  EXPECT_EQ(values(out.tap_bin), std::vector<double>(9, 1.0));
}

TEST(ComputeMasks, ReceptiveFieldExample) {
  MaskSet set = MaskSet::create(1, 5);
  set.beta = Tensor({5}, {1, 1, 0.2, 0.1, 0.05});
  const MaskOutputs out = compute_masks(set);
  const std::vector<double> soft{2.35, 1.35, 0.35, 0.15, 0.05};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(out.b_soft[i], soft[i], 1e-12);
  EXPECT_EQ(values(out.b_bin), (std::vector<double>{1, 1, 0, 0, 0}));
}

TEST(ComputeMasks, DilationExample) {
  MaskSet set = MaskSet::create(1, 9);
  set.gamma = Tensor({4}, {1, 1, 1, 0.1});
  const MaskOutputs out = compute_masks(set);
  EXPECT_EQ(values(out.g_bin), (std::vector<double>{1, 0, 1, 0, 1, 0, 1, 0, 1}));
  const BinaryLayerShape s = binary_layer_shape(out);
  EXPECT_EQ(s.dilation, 2u);
  EXPECT_EQ(s.receptive_field, 9u);
  EXPECT_EQ(s.kernel_size, 5u);
}

TEST(ComputeMasks, IntersectionOfReceptiveFieldAndDilation) {
  MaskSet set = MaskSet::create(1, 9);
  set.gamma = Tensor({4}, {1, 1, 1, 0.1});
  set.beta = Tensor({9}, {1, 0, 0, 0, 0.6, 0, 0, 0, 0});
  const BinaryLayerShape s = binary_layer_shape(compute_masks(set));
  EXPECT_EQ(s.kept_taps, (std::vector<std::size_t>{0, 2, 4}));
  EXPECT_EQ(s.dilation, 2u);
  EXPECT_EQ(s.receptive_field, 5u);
  EXPECT_EQ(s.kernel_size, 3u);
}

TEST(ComputeMasks, KeepOneChannel) {
  MaskSet set = MaskSet::create(3, 2);
  set.alpha = Tensor({3}, {0.1, -0.3, 0.2});
  EXPECT_EQ(values(compute_masks(set, false).a_bin), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(values(compute_masks(set, true).a_bin), (std::vector<double>{0, 1, 0}));
}

TEST(ComputeMasks, StructuralPropertiesOnRandomDraws) {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t f = 2 + rng.below(63);
    MaskSet set = MaskSet::create(2, f);
    for (double& v : set.beta.data()) v = rng.uniform(-0.6, 0.6);
    for (double& v : set.gamma.data()) v = rng.uniform(-0.6, 0.6);
    set.beta[0] = 1.0;
    set.gamma[0] = 1.0;
    const MaskOutputs out = compute_masks(set);
    for (std::size_t i = 1; i < f; ++i) ASSERT_LE(out.b_soft[i], out.b_soft[i - 1]);
    ASSERT_EQ(out.b_bin[0], 1.0);
    ASSERT_EQ(out.g_bin[0], 1.0);
    std::size_t zeros = 0;
    std::vector<double> gamma_agg(set.len_gamma);
    for (std::size_t m = 0; m < set.len_gamma; ++m) {
      double s = 0.0;
      for (std::size_t q = m; q < set.len_gamma; ++q) s += std::fabs(set.gamma[q]);
      zeros += s < 0.5;
    }
    const std::size_t step = std::size_t{1} << zeros;
    for (std::size_t i = 0; i < f; ++i) ASSERT_EQ(out.g_bin[i], i % step == 0 ? 1.0 : 0.0) << "f=" << f;
  }
}

TEST(ComputeMasks, GradientsOfSoftMasks) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t f = 2 + rng.below(20);
    const std::size_t c = 1 + rng.below(6);
    const auto draw = [&](std::size_t n) {
      Tensor t({n});
      for (double& v : t.data()) v = rng.uniform(0.1, 1.0) * (rng.uniform() < 0.5 ? -1 : 1);
      t.set_requires_grad(true);
      return t;
    };
    const std::size_t len = gamma_length(f);
    auto r = testutil::check_gradients({draw(c), draw(f), draw(len)}, [&](const std::vector<Tensor>& in) {
      MaskSet set = MaskSet::create(c, f);
      set.alpha = in[0];
      set.beta = in[1];
      set.gamma = in[2];
      const MaskOutputs out = compute_masks(set);
      Tensor w({f});
      for (std::size_t i = 0; i < f; ++i) w[i] = 1.0 + 0.1 * static_cast<double>(i);
      return add(sum(out.a_soft), add(sum(mul(out.b_soft, w)), sum(mul(out.g_soft, w))));
    });
    EXPECT_LT(r.worst, 1e-4) << r.where;
  }
}

TEST(ComputeMasks, BinarizedMasksPassGradientsThrough) {
  MaskSet set = MaskSet::create(2, 4);
  set.set_trainable(true);
  Tape tape;
  {
    TapeScope scope(tape);
    const MaskOutputs out = compute_masks(set);
    tape.backward(add(sum(out.a_bin), sum(out.b_bin)));
  }
  EXPECT_EQ(set.alpha.grad()[0], 1.0);
  // b_bin row i collects beta_i..beta_3, so beta_j receives j + 1 ones
  EXPECT_EQ(values(Tensor({4}, std::vector<double>(set.beta.grad().begin(), set.beta.grad().end()))),
            (std::vector<double>{1, 2, 3, 4}));
}

TEST(ApplyMasks, ZeroesPrunedChannelsAndTaps) {
  Tensor w({2, 1, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  MaskSet set = MaskSet::create(2, 4);
  EXPECT_EQ(values(apply_masks(w, compute_masks(set))), values(w));
  set.alpha[1] = 0.0;
  set.gamma[1] = 0.0;
  EXPECT_EQ(values(apply_masks(w, compute_masks(set))), (std::vector<double>{1, 0, 3, 0, 0, 0, 0, 0}));
}
