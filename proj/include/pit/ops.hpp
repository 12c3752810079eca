#pragma once

#include <cstdint>
#include <span>

#include "pit/tensor.hpp"

// Differentiable primitives. Every function records a backward rule on the
// active tape when one of its inputs requires grad. Activations are laid out
// as [N, C, T] (batch, channels, time); a rank-2 [C, T] input to conv1d is
// treated as a single sample.
namespace pit {

/// Causal dilated 1D convolution:
///   y[n][m][t] = b[m] + sum_i sum_l x[n][l][t*stride - dilation*i] * w[m][l][i]
/// with inputs before t = 0 read as zero. w is [C_out, C_in, K]; tap i looks
/// i*dilation steps into the past. Output length is ceil(T_in / stride).
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias = {},
              std::size_t stride = 1, std::size_t dilation = 1);

/// x is [N, I] or [I]; w is [O, I].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias = {});

/// M is [R, C], v is [C]. M is typically a constant mask-transform matrix.
Tensor matvec(const Tensor& m, const Tensor& v);

Tensor relu(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// Elementwise x / denom for a constant denom of the same shape (no gradient
/// reaches denom).
Tensor divide(const Tensor& x, const Tensor& denom);
Tensor add_scalar(const Tensor& x, double value);
/// Elementwise min(x, hi); gradient is 1 below hi and 0 at or above it.
Tensor clamp_max(const Tensor& x, double hi);
/// Sum of all elements as a [1] tensor.
Tensor sum(const Tensor& x);

/// Forward: 1 where v >= threshold, else 0. Backward: identity
/// (straight-through estimator).
Tensor heaviside_ste(const Tensor& v, double threshold = 0.5);

/// w[m][l][i] * out_mask[m] * tap_mask[i] for w of shape [C_out, C_in, K].
Tensor mask_weight(const Tensor& w, const Tensor& out_mask, const Tensor& tap_mask);

/// x[n][c][...] * mask[c] for x of shape [N, C, ...].
Tensor mask_channels(const Tensor& x, const Tensor& mask);

/// Places channel j of x ([N, C, T]) at channel index[j] of a zero
/// [N, total, T] tensor.
Tensor scatter_channels(const Tensor& x, std::span<const std::size_t> index,
                        std::size_t total);

/// Reshape sharing storage; gradient flows through the shared buffer.
Tensor reshape(const Tensor& x, Shape shape);

struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  explicit BatchNormStats(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

/// Per-channel batch normalization over the N and T axes of x ([N, C, T]).
/// In train mode batch statistics are used and the running statistics are
/// updated (outside the tape); in eval mode the running statistics are used.
Tensor batchnorm1d(const Tensor& x, const Tensor& weight, const Tensor& shift,
                   BatchNormStats& stats, bool train, double momentum = 0.1,
                   double eps = 1e-5);

/// Average pooling along T with the given window and stride (no padding).
Tensor avgpool1d(const Tensor& x, std::size_t window, std::size_t stride);

/// Key of the counter-based dropout generator.
struct DropoutKey {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t batch = 0;
  std::uint64_t layer = 0;
};

/// Inverted dropout. Identity when train is false or rate is 0. The kept set
/// is a pure function of the key, so a forward is reproducible.
Tensor dropout(const Tensor& x, double rate, bool train, const DropoutKey& key);

/// Mean softmax cross-entropy of logits [N, K] against integer labels.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Mean squared error over all elements.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

/// Uniform double in [0, 1) derived from a 64-bit counter hash.
double counter_uniform(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                       std::uint64_t d, std::uint64_t e);

}  // namespace pit
