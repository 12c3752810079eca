#include "pit/cost.hpp"

#include <algorithm>
#include <stdexcept>

namespace pit {

RegKind parse_reg_kind(const std::string& s) {
  if (s == "size") return RegKind::size;
  if (s == "ops") return RegKind::ops;
  throw ConfigError("regularizer must be 'size' or 'ops', got '" + s + "'");
}

std::string to_string(RegKind k) { return k == RegKind::size ? "size" : "ops"; }

Tensor c_out_eff(const MaskOutputs& masks) { return sum(masks.a_soft); }

Tensor k_eff(const MaskSet& set, const MaskOutputs& masks) {
  const std::size_t f = set.f_seed();
  Tensor beta_den(Shape{f});
  Tensor gamma_den(Shape{f});
  for (std::size_t i = 0; i < f; ++i) {
    beta_den[i] = static_cast<double>(f - i);
    gamma_den[i] = set.len_gamma == 0 ? 1.0 : static_cast<double>(set.len_gamma - set.k_map[i]);
  }
  return sum(mul(divide(masks.b_soft, beta_den), divide(masks.g_soft, gamma_den)));
}

namespace {

Tensor constant(double v) { return Tensor::scalar(v); }

Tensor soft_union(const Tensor& a, const Tensor& b) {
  const Tensor u = clamp_max(a, 1.0);
  const Tensor v = clamp_max(b, 1.0);
  return sub(add(u, v), mul(u, v));
}

LayerCost make_cost(std::string name, Tensor c_in, Tensor c_out, Tensor k, std::size_t t_out) {
  LayerCost c;
  c.name = std::move(name);
  c.c_in_eff = std::move(c_in);
  c.c_out_eff = std::move(c_out);
  c.k_eff = std::move(k);
  c.size = mul(mul(c.c_in_eff, c.c_out_eff), c.k_eff);
  c.ops = scale(c.size, static_cast<double>(t_out));
  c.t_out = t_out;
  return c;
}

}  // namespace

CostBreakdown compute_costs(const NasModel& model) { return compute_costs(model, model.compute_mask_table()); }

CostBreakdown compute_costs(const NasModel& model, const MaskTable& table) {
  const auto& spec = model.spec();
  const auto& shapes = model.shapes();
  CostBreakdown out;
  Tensor live(Shape{spec.input_channels}, 1.0);
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& block = spec.blocks[b];
    const Tensor block_live = live;
    for (std::size_t m = 0; m < block.layers.size(); ++m) {
      const auto& ls = block.layers[m];
      const auto& shape = shapes.layers[b][m];
      if (ls.kind == LayerKind::avgpool) continue;
      const MaskOutputs* mo = table.at(b).at(m) ? &*table[b][m] : nullptr;
      Tensor c_in = sum(live);
      if (ls.kind == LayerKind::fc) c_in = scale(c_in, static_cast<double>(shape.t_in));
      Tensor c_out, k;
      if (mo) {
        c_out = c_out_eff(*mo);
        k = ls.kind == LayerKind::conv1d ? k_eff(*model.layer(b, m).masks, *mo) : constant(1.0);
        live = mo->a_soft;
      } else {
        c_out = constant(static_cast<double>(shape.c_out));
        k = constant(ls.kind == LayerKind::conv1d ? static_cast<double>(ls.f_seed) : 1.0);
        live = Tensor(Shape{shape.c_out}, 1.0);
      }
      out.layers.push_back(make_cost(layer_name(b, m), c_in, c_out, k, shape.t_out));
    }
    if (block.residual == Residual::identity) {
      live = soft_union(live, block_live);
    } else if (block.residual == Residual::pointwise) {
      const auto& s = *shapes.skips[b];
      out.layers.push_back(make_cost(skip_name(b), sum(block_live), sum(live), constant(1.0), s.t_out));
    }
  }
  out.r_size = constant(0.0);
  out.r_ops = constant(0.0);
  for (const auto& c : out.layers) {
    out.r_size = add(out.r_size, c.size);
    out.r_ops = add(out.r_ops, c.ops);
  }
  return out;
}

LossTerms total_loss(const Tensor& task_loss, const CostBreakdown& costs, double lambda, RegKind kind) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("regularization strength must be non-negative");
  const Tensor& r = kind == RegKind::size ? costs.r_size : costs.r_ops;
  LossTerms terms;
  terms.task = task_loss.item();
  terms.regularizer = r.item();
  terms.weighted = lambda * terms.regularizer;
  terms.total = lambda == 0.0 ? task_loss : add(task_loss, scale(r, lambda));
  return terms;
}

IntegerCosts integer_costs(const NasModel& model, const MaskTable& table) {
  const auto& spec = model.spec();
  const auto& shapes = model.shapes();
  IntegerCosts out;
  const auto charge = [&](std::uint64_t c_in, std::uint64_t c_out, std::uint64_t k, std::uint64_t t) {
    out.weights += c_in * c_out * k;
    out.with_bias += c_in * c_out * k + c_out;
    out.macs += c_in * c_out * k * t;
  };
  std::vector<bool> live(spec.input_channels, true);
  const auto count = [](const std::vector<bool>& v) {
    return static_cast<std::uint64_t>(std::count(v.begin(), v.end(), true));
  };
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& block = spec.blocks[b];
    const std::vector<bool> block_live = live;
    for (std::size_t m = 0; m < block.layers.size(); ++m) {
      const auto& ls = block.layers[m];
      const auto& shape = shapes.layers[b][m];
      if (ls.kind == LayerKind::avgpool) continue;
      const MaskOutputs* mo = table.at(b).at(m) ? &*table[b][m] : nullptr;
      std::uint64_t c_in = count(live);
      if (ls.kind == LayerKind::fc) c_in *= shape.t_in;
      std::uint64_t k = ls.kind == LayerKind::conv1d ? ls.f_seed : 1;
      if (mo) {
        const BinaryLayerShape bs = binary_layer_shape(*mo);
        if (ls.kind == LayerKind::conv1d) k = bs.kernel_size;
        live.assign(shape.c_out, false);
        for (std::size_t c : bs.kept_channels) live[c] = true;
      } else {
        live.assign(shape.c_out, true);
      }
      charge(c_in, count(live), k, shape.t_out);
    }
    if (block.residual == Residual::identity) {
      for (std::size_t c = 0; c < live.size(); ++c) live[c] = live[c] || block_live[c];
    } else if (block.residual == Residual::pointwise) {
      charge(count(block_live), count(live), 1, shapes.skips[b]->t_out);
    }
  }
  return out;
}

}  // namespace pit
