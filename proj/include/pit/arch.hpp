#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pit/cost.hpp"
#include "pit/model.hpp"

namespace pit {

/// Concrete shape of one layer after extraction. Channel indices refer to
/// the seed layer and are kept in ascending seed order.
struct ArchLayer {
  std::string name;
  LayerKind kind = LayerKind::conv1d;
  bool searchable = false;
  std::vector<std::size_t> input_channels;  // live seed channels of the input
  std::vector<std::size_t> kept_channels;   // surviving output channels
  std::vector<std::size_t> kept_taps;       // conv only
  std::size_t c_in = 0;                     // fc: flattened input features
  std::size_t c_out = 0;
  std::size_t kernel_size = 1;
  std::size_t dilation = 1;
  std::size_t receptive_field = 1;
  std::size_t stride = 1;
  std::size_t t_out = 0;
  bool eliminated = false;

  bool operator==(const ArchLayer&) const = default;
};

/// Pointwise conv on a residual skip path; its output channels follow the
/// block's last layer.
struct ArchSkip {
  std::string name;
  std::vector<std::size_t> input_channels;
  std::vector<std::size_t> kept_channels;
  std::size_t t_out = 0;

  bool operator==(const ArchSkip&) const = default;
};

struct EffectiveArch {
  std::vector<ArchLayer> layers;  // flat order, including pooling layers
  std::vector<ArchSkip> skips;
  std::uint64_t params_weights_only = 0;
  std::uint64_t params_with_bias = 0;
  std::uint64_t macs = 0;

  bool operator==(const EffectiveArch&) const = default;
};

/// Reads kept channels, taps, F, d and K of every layer from the binarized
/// masks and propagates live channel sets through the topology. Throws
/// std::logic_error if a mask is internally inconsistent.
EffectiveArch extract(const NasModel& model);
EffectiveArch extract(const NasModel& model, const MaskTable& masks);

/// Integer totals from layer dimensions: sum of c_in * c_out * K, plus
/// biases, and the same weighted by the output length.
IntegerCosts count(const EffectiveArch& arch);

std::string serialize_arch(const EffectiveArch& arch);
EffectiveArch parse_arch(const IniDocument& doc);
/// Fixed-width per-layer summary followed by the totals.
std::string format_arch_table(const EffectiveArch& arch);

struct ConcreteLayer {
  LayerKind kind = LayerKind::conv1d;
  Tensor weight;  // conv: [c_out, c_in, K]; fc: [c_out, c_in]
  Tensor bias;
  Tensor bn_weight, bn_shift;
  BatchNormStats bn_stats;
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t window = 1;  // avgpool
  bool batchnorm = false;
  Activation activation = Activation::none;
  double dropout = 0.0;
  std::vector<std::size_t> out_index;  // seed channel of every output channel
  std::size_t seed_channels = 0;       // output channels of the seed layer
};

struct ConcreteBlock {
  std::vector<ConcreteLayer> layers;
  Residual residual = Residual::none;
  Tensor skip_weight, skip_bias;  // pointwise residual only
  std::vector<std::size_t> in_index;
  std::vector<std::size_t> out_index;
};

/// A plain network with standard (K, d) convolutions and no masks.
class ConcreteModel {
 public:
  ConcreteModel(NetworkSpec seed, std::vector<ConcreteBlock> blocks)
      : seed_(std::move(seed)), blocks_(std::move(blocks)) {}

  const NetworkSpec& seed_spec() const { return seed_; }
  const std::vector<ConcreteBlock>& blocks() const { return blocks_; }
  std::vector<ConcreteBlock>& blocks() { return blocks_; }

  /// Inference forward. `trace` receives every layer output scattered back
  /// to the seed channel layout, in flat order, with residual block outputs
  /// replacing the block's last layer output.
  Tensor forward(const Tensor& x, const ForwardOptions& options = {}, std::vector<Tensor>* trace = nullptr);

  /// Parameter and MAC totals read from the weight tensor shapes.
  IntegerCosts count() const;

  /// Architecture implied by the tensor shapes.
  EffectiveArch arch() const;

  std::vector<std::pair<std::string, Tensor>> named_tensors() const;

 private:
  NetworkSpec seed_;
  std::vector<ConcreteBlock> blocks_;
};

/// Copies the surviving (channel, tap) slices of the masked model into a
/// standalone model shaped like `arch`.
ConcreteModel materialize(const NasModel& model, const EffectiveArch& arch);

struct EquivalenceReport {
  bool passed = true;
  double max_abs_diff = 0.0;
  std::size_t worst_trial = 0;
  std::size_t trials = 0;
  double tolerance = 0.0;
  /// First layer whose output diverges, found by bisection over layer traces.
  std::optional<std::string> failing_layer;
};

/// Runs both models in inference mode on `trials` standard-normal inputs.
EquivalenceReport verify_equivalence(NasModel& masked, ConcreteModel& pruned, std::size_t trials,
                                     double tol = 1e-5, std::uint64_t rng_seed = 0);

class CapExceeded : public std::runtime_error {
 public:
  CapExceeded(std::uint64_t bound, std::uint64_t cap);
  std::uint64_t bound() const { return bound_; }

 private:
  std::uint64_t bound_;
};

struct LayerChoice {
  std::size_t channels = 1;
  std::size_t receptive_field = 1;
  std::size_t dilation = 1;
  auto operator<=>(const LayerChoice&) const = default;
};

/// Distinct (channels, F, d) triples one searchable layer can reach.
std::vector<LayerChoice> layer_choices(std::size_t c_out_seed, std::size_t f_seed);

struct SearchSpaceCount {
  std::uint64_t exact = 0;  // number of enumerated architectures
  double formula = 0.0;     // product of C * F * max(1, ceil(log2 F))
  std::vector<std::uint64_t> per_layer;
};

/// prod over layers of C_seed * F_seed * max(1, ceil(log2 F_seed)).
double search_space_formula(const std::vector<std::pair<std::size_t, std::size_t>>& layers);

/// Walks every architecture of the search space (searchable layers only).
/// Throws CapExceeded before enumerating when the exact count exceeds `cap`.
SearchSpaceCount enumerate_search_space(const NetworkSpec& spec, std::uint64_t cap,
                                        const std::function<void(const std::vector<LayerChoice>&)>& visit = {});

}  // namespace pit
