#include "pit/masks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pit/ops.hpp"

namespace pit {

Tensor build_c_beta(std::size_t f_seed) {
  if (f_seed < 1) throw std::invalid_argument("build_c_beta: f_seed must be >= 1");
  Tensor c(Shape{f_seed, f_seed});
  for (std::size_t i = 0; i < f_seed; ++i) {
    for (std::size_t j = i; j < f_seed; ++j) c[i * f_seed + j] = 1.0;
  }
  return c;
}

std::size_t gamma_length(std::size_t f_seed) {
  std::size_t len = 0;
  while ((std::size_t{1} << len) < f_seed) ++len;
  return len;
}

KMap build_k_map(std::size_t f_seed) {
  if (f_seed < 2) throw std::invalid_argument("build_k_map: f_seed must be >= 2");
  KMap out;
  out.len_gamma = gamma_length(f_seed);
  out.k.resize(f_seed);
  for (std::size_t i = 0; i < f_seed; ++i) {
    std::size_t k = 0;
    for (std::size_t p = 1; p + 1 <= out.len_gamma; ++p) {
      if (i % (std::size_t{1} << p) != 0) ++k;
    }
    out.k[i] = k;
  }
  return out;
}

Tensor build_c_gamma(std::size_t f_seed) {
  const KMap km = build_k_map(f_seed);
  Tensor c(Shape{f_seed, km.len_gamma});
  for (std::size_t i = 0; i < f_seed; ++i) {
    for (std::size_t j = km.k[i]; j < km.len_gamma; ++j) c[i * km.len_gamma + j] = 1.0;
  }
  return c;
}

MaskSet MaskSet::create(std::size_t c_out_seed, std::size_t f_seed) {
  if (c_out_seed < 1 || f_seed < 1) {
    throw std::invalid_argument("MaskSet: c_out_seed and f_seed must be >= 1");
  }
  MaskSet m;
  m.alpha = Tensor(Shape{c_out_seed}, 1.0);
  m.beta = Tensor(Shape{f_seed}, 1.0);
  m.c_beta = build_c_beta(f_seed);
  if (f_seed >= 2) {
    const KMap km = build_k_map(f_seed);
    m.k_map = km.k;
    m.len_gamma = km.len_gamma;
    m.gamma = Tensor(Shape{km.len_gamma}, 1.0);
    m.c_gamma = build_c_gamma(f_seed);
  } else {
    m.k_map = {0};
  }
  return m;
}

void MaskSet::set_trainable(bool on) {
  alpha.set_requires_grad(on);
  beta.set_requires_grad(on);
  if (gamma.defined()) gamma.set_requires_grad(on);
}

MaskSet MaskSet::clone() const {
  MaskSet m = *this;
  m.alpha = alpha.clone();
  m.beta = beta.clone();
  if (gamma.defined()) m.gamma = gamma.clone();
  m.alpha.set_requires_grad(alpha.requires_grad());
  m.beta.set_requires_grad(beta.requires_grad());
  if (gamma.defined()) m.gamma.set_requires_grad(gamma.requires_grad());
  return m;
}

MaskOutputs compute_masks(const MaskSet& masks, bool keep_one_channel) {
  MaskOutputs out;
  out.a_soft = abs(masks.alpha);
  out.a_bin = heaviside_ste(out.a_soft, 0.5);
  if (keep_one_channel) {
    bool any = false;
    for (double v : out.a_bin.data()) any = any || v != 0.0;
    if (!any) {
      const auto a = out.a_soft.data();
      const auto best = std::max_element(a.begin(), a.end()) - a.begin();
      out.a_bin[static_cast<std::size_t>(best)] = 1.0;
    }
  }
  out.b_soft = matvec(masks.c_beta, abs(masks.beta));
  out.b_bin = heaviside_ste(out.b_soft, 0.5);
  if (masks.gamma.defined()) {
    out.g_soft = matvec(masks.c_gamma, abs(masks.gamma));
    out.g_bin = heaviside_ste(out.g_soft, 0.5);
  } else {
    out.g_soft = Tensor(Shape{masks.f_seed()}, 1.0);
    out.g_bin = Tensor(Shape{masks.f_seed()}, 1.0);
  }
  out.tap_bin = mul(out.b_bin, out.g_bin);
  return out;
}

Tensor apply_masks(const Tensor& weight, const MaskOutputs& masks) {
  return mask_weight(weight, masks.a_bin, masks.tap_bin);
}

BinaryLayerShape binary_layer_shape(const MaskOutputs& masks) {
  BinaryLayerShape s;
  for (std::size_t m = 0; m < masks.a_bin.numel(); ++m) {
    if (masks.a_bin[m] != 0.0) s.kept_channels.push_back(m);
  }
  const std::size_t f_seed = masks.b_bin.numel();
  for (std::size_t i = 1; i < f_seed; ++i) {
    if (masks.b_bin[i] > masks.b_bin[i - 1]) {
      throw std::logic_error("receptive-field mask is not non-increasing at tap " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < f_seed; ++i) {
    if (masks.tap_bin[i] != 0.0) s.kept_taps.push_back(i);
  }
  if (s.kept_taps.empty() || s.kept_taps.front() != 0) {
    throw std::logic_error("tap 0 must always be kept");
  }
  s.receptive_field = s.kept_taps.back() + 1;
  if (s.kept_taps.size() == 1) {
    s.dilation = 1;
    s.kernel_size = 1;
    return s;
  }
  s.dilation = s.kept_taps[1];
  for (std::size_t j = 0; j < s.kept_taps.size(); ++j) {
    if (s.kept_taps[j] != j * s.dilation) {
      throw std::logic_error("kept taps do not form a regular dilation pattern");
    }
  }
  if ((s.dilation & (s.dilation - 1)) != 0) {
    throw std::logic_error("dilation " + std::to_string(s.dilation) + " is not a power of two");
  }
  s.kernel_size = (s.receptive_field - 1) / s.dilation + 1;
  return s;
}

}  // namespace pit
