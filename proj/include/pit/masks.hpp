#pragma once

#include <cstddef>
#include <vector>

#include "pit/tensor.hpp"

namespace pit {

/// Upper-triangular matrix of ones, [f_seed x f_seed]: row i sums
/// |beta_i| .. |beta_{f_seed-1}|, so the oldest taps are pruned first.
Tensor build_c_beta(std::size_t f_seed);

/// Number of gamma entries for a receptive field: ceil(log2(f_seed)).
std::size_t gamma_length(std::size_t f_seed);

struct KMap {
  std::vector<std::size_t> k;  // one entry per tap
  std::size_t len_gamma = 0;
};

/// Index of the Gamma entry that gates tap i:
///   k(i) = sum_{p=1}^{len_gamma-1} [i mod 2^p != 0]
/// Odd taps map to the last entry, taps that are odd multiples of 2 to the
/// one before it, and so on; tap 0 maps to entry 0.
KMap build_k_map(std::size_t f_seed);

/// [f_seed x len_gamma] matrix whose row i has ones in columns
/// k(i)..len_gamma-1.
Tensor build_c_gamma(std::size_t f_seed);

/// Architectural parameters of one searchable layer plus the constant
/// transforms that turn them into masks. beta[0] and gamma[0] stay at 1.
struct MaskSet {
  Tensor alpha;  // [c_out_seed]
  Tensor beta;   // [f_seed]
  Tensor gamma;  // [len_gamma]; undefined when f_seed == 1
  Tensor c_beta;
  Tensor c_gamma;  // undefined when f_seed == 1
  std::vector<std::size_t> k_map;
  std::size_t len_gamma = 0;

  /// All parameters initialised to 1.
  static MaskSet create(std::size_t c_out_seed, std::size_t f_seed);

  std::size_t c_out_seed() const { return alpha.numel(); }
  std::size_t f_seed() const { return beta.numel(); }
  void set_trainable(bool on);
  /// Deep copy of the parameters (constant transforms are shared).
  MaskSet clone() const;
};

struct MaskOutputs {
  Tensor a_bin, b_bin, g_bin;     // binarized, lengths c_out, f, f
  Tensor a_soft, b_soft, g_soft;  // pre-binarization, all >= 0
  Tensor tap_bin;                 // b_bin * g_bin
};

/// Builds the three masks on the tape. When `keep_one_channel` is set and
/// every channel would be pruned, the channel with the largest |alpha| is
/// kept for this forward pass.
MaskOutputs compute_masks(const MaskSet& masks, bool keep_one_channel = false);

/// W[m][l][i] * a_bin[m] * b_bin[i] * g_bin[i] for W of shape
/// [c_out_seed, c_in, f_seed]; the result is used with dilation 1.
Tensor apply_masks(const Tensor& weight, const MaskOutputs& masks);

/// Integer view of binarized masks.
struct BinaryLayerShape {
  std::vector<std::size_t> kept_channels;
  std::vector<std::size_t> kept_taps;
  std::size_t dilation = 1;
  std::size_t receptive_field = 1;
  std::size_t kernel_size = 1;
};

/// Reads kept channels and taps from binarized masks and derives (F, d, K).
/// Throws std::logic_error if the tap set is not a regular dilation pattern.
BinaryLayerShape binary_layer_shape(const MaskOutputs& masks);

}  // namespace pit
