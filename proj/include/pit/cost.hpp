#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pit/model.hpp"

namespace pit {

enum class RegKind { size, ops };

RegKind parse_reg_kind(const std::string& s);
std::string to_string(RegKind k);

/// Differentiable cost of one weighted layer (conv, fc or residual skip conv).
struct LayerCost {
  std::string name;
  Tensor c_in_eff;   // [1]; for fc layers this counts flattened input features
  Tensor c_out_eff;  // [1]
  Tensor k_eff;      // [1]
  Tensor size;       // c_in_eff * c_out_eff * k_eff
  Tensor ops;        // size * t_out
  std::size_t t_out = 0;
};

struct CostBreakdown {
  std::vector<LayerCost> layers;
  Tensor r_size;  // [1]
  Tensor r_ops;   // [1]
};

/// Sum of the soft channel mask: sum_m |alpha_m|.
Tensor c_out_eff(const MaskOutputs& masks);

/// sum_i b_soft[i] / (F - i) * g_soft[i] / (len_gamma - k(i)); equals F when
/// every mask parameter is 1.
Tensor k_eff(const MaskSet& set, const MaskOutputs& masks);

/// Size and OPs estimates chained along the topology. The input-channel term
/// of every layer is the summed soft liveness of the tensor it reads: the
/// producing layer's |alpha| for a conv output, 1 - (1-u)(1-v) with u, v
/// clamped to 1 after an identity residual add, and constants for the network
/// input and unmasked layers. The task head is included.
CostBreakdown compute_costs(const NasModel& model, const MaskTable& masks);
CostBreakdown compute_costs(const NasModel& model);

struct LossTerms {
  Tensor total;
  double task = 0.0;
  double regularizer = 0.0;  // R before scaling
  double weighted = 0.0;     // lambda * R
};

/// task_loss + lambda * (r_size or r_ops). Throws std::invalid_argument for a
/// negative lambda.
LossTerms total_loss(const Tensor& task_loss, const CostBreakdown& costs, double lambda, RegKind kind);

struct IntegerCosts {
  std::uint64_t weights = 0;    // weights only
  std::uint64_t with_bias = 0;  // weights plus conv/fc biases
  std::uint64_t macs = 0;
  bool operator==(const IntegerCosts&) const = default;
};

/// The same chaining as compute_costs evaluated on binarized masks, with
/// integer kernel sizes taken from the kept taps.
IntegerCosts integer_costs(const NasModel& model, const MaskTable& masks);

}  // namespace pit
