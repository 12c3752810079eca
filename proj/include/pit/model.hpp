#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pit/masks.hpp"
#include "pit/network.hpp"
#include "pit/ops.hpp"
#include "pit/optim.hpp"

namespace pit {

/// Trainable state of one layer of the seed network.
struct LayerParams {
  Tensor weight;  // conv: [c_out, c_in, f_seed]; fc: [c_out, c_in * t_in]
  Tensor bias;    // [c_out]; undefined for avgpool
  Tensor bn_weight, bn_shift;
  BatchNormStats bn_stats;
  std::optional<MaskSet> masks;
  /// Forces the largest |alpha| channel on when every channel is pruned.
  bool keep_one_channel = true;
};

/// Pointwise conv on the skip path of a residual block. Its channel mask is
/// the one of the block's last layer.
struct SkipParams {
  Tensor weight;  // [c_out, c_in, 1]
  Tensor bias;
};

struct ForwardOptions {
  bool train = false;
  /// When false the seed network runs without any mask.
  bool use_masks = true;
  DropoutKey dropout;
};

/// Binarized and soft masks of every searchable layer, computed once per
/// forward pass. Entries are empty for layers without masks.
using MaskTable = std::vector<std::vector<std::optional<MaskOutputs>>>;

class NasModel {
 public:
  /// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases,
  /// batchnorm scale 1 and shift 0, every mask parameter 1.
  static NasModel build(const NetworkSpec& spec, std::uint64_t rng_seed);

  const NetworkSpec& spec() const { return spec_; }
  const ShapeTable& shapes() const { return shapes_; }

  LayerParams& layer(std::size_t block, std::size_t index) { return layers_.at(block).at(index); }
  const LayerParams& layer(std::size_t block, std::size_t index) const { return layers_.at(block).at(index); }
  std::optional<SkipParams>& skip(std::size_t block) { return skips_.at(block); }
  const std::optional<SkipParams>& skip(std::size_t block) const { return skips_.at(block); }

  std::size_t searchable_count() const;

  MaskTable compute_mask_table() const;

  /// Output logits [N, outputs] for x of shape [N, input_channels, input_length].
  /// `trace`, when given, receives the output of every layer in flat order.
  Tensor forward(const Tensor& x, const ForwardOptions& options, std::vector<Tensor>* trace = nullptr);
  Tensor forward(const Tensor& x, const ForwardOptions& options, const MaskTable& masks,
                 std::vector<Tensor>* trace = nullptr);

  std::vector<ParamRef> weight_params();
  /// alpha, beta, gamma of every searchable layer; beta[0] and gamma[0] are
  /// frozen.
  std::vector<ParamRef> mask_params();
  void set_weights_trainable(bool on);
  void set_masks_trainable(bool on);

  /// Every persistent tensor by name (weights, batchnorm state, masks).
  std::vector<std::pair<std::string, Tensor>> named_tensors() const;
  /// Copies values from named tensors; every model tensor must be present
  /// with a matching shape.
  void load_named(const std::vector<std::pair<std::string, Tensor>>& tensors);

  /// Independent copy of all parameters and statistics.
  NasModel clone() const;

  /// Rounds every stored value to single precision.
  void round_to_float();

  /// Draws fresh weights (masks and batchnorm statistics are reset as well,
  /// except the mask parameters).
  void reinitialize_weights(std::uint64_t rng_seed);

 private:
  NetworkSpec spec_;
  ShapeTable shapes_;
  std::vector<std::vector<LayerParams>> layers_;
  std::vector<std::optional<SkipParams>> skips_;
};

/// Index of the flat layer order (block-major) used by traces and dropout keys.
std::size_t flat_layer_index(const NetworkSpec& spec, std::size_t block, std::size_t layer);

}  // namespace pit
