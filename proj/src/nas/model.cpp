#include "pit/model.hpp"

#include <cmath>
#include <map>

#include "pit/rng.hpp"

namespace pit {

std::size_t flat_layer_index(const NetworkSpec& spec, std::size_t block, std::size_t layer) {
  std::size_t flat = 0;
  for (std::size_t b = 0; b < block; ++b) flat += spec.blocks[b].layers.size();
  return flat + layer;
}

namespace {

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in == 0 ? 1 : fan_in));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

void init_layer(LayerParams& p, const LayerSpec& spec, const LayerShape& shape, Rng& rng) {
  switch (spec.kind) {
    case LayerKind::conv1d:
      p.weight = kaiming_uniform({shape.c_out, shape.c_in, spec.f_seed}, shape.c_in * spec.f_seed, rng);
      p.bias = Tensor(Shape{shape.c_out});
      break;
    case LayerKind::fc:
      p.weight = kaiming_uniform({shape.c_out, shape.c_in * shape.t_in}, shape.c_in * shape.t_in, rng);
      p.bias = Tensor(Shape{shape.c_out});
      break;
    case LayerKind::avgpool:
      break;
  }
  if (spec.batchnorm) {
    p.bn_weight = Tensor(Shape{shape.c_out}, 1.0);
    p.bn_shift = Tensor(Shape{shape.c_out});
    p.bn_stats = BatchNormStats(shape.c_out);
  }
}

void round_tensor(Tensor& t) {
  if (!t.defined()) return;
  for (double& v : t.data()) v = static_cast<double>(static_cast<float>(v));
}

void round_vector(std::vector<double>& v) {
  for (double& x : v) x = static_cast<double>(static_cast<float>(x));
}

Tensor from_vector(const std::vector<double>& v) { return Tensor(Shape{v.size()}, v); }

}  // namespace

NasModel NasModel::build(const NetworkSpec& spec, std::uint64_t rng_seed) {
  NasModel model;
  model.spec_ = spec;
  model.shapes_ = propagate_shapes(spec);
  model.layers_.resize(spec.blocks.size());
  model.skips_.resize(spec.blocks.size());
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& block = spec.blocks[b];
    model.layers_[b].resize(block.layers.size());
    for (std::size_t m = 0; m < block.layers.size(); ++m) {
      const auto& ls = block.layers[m];
      auto& p = model.layers_[b][m];
      if (has_masks(ls)) {
        p.masks = MaskSet::create(ls.c_out, ls.kind == LayerKind::fc ? 1 : ls.f_seed);
      }
      const bool last = m + 1 == block.layers.size();
      p.keep_one_channel = block.residual == Residual::none ||
                           (block.residual == Residual::pointwise && last);
    }
    if (block.residual == Residual::pointwise) model.skips_[b] = SkipParams{};
  }
  model.reinitialize_weights(rng_seed);
  return model;
}

void NasModel::reinitialize_weights(std::uint64_t rng_seed) {
  for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
    for (std::size_t m = 0; m < spec_.blocks[b].layers.size(); ++m) {
      Rng rng(derive_seed(rng_seed, b, m));
      init_layer(layers_[b][m], spec_.blocks[b].layers[m], shapes_.layers[b][m], rng);
    }
    if (skips_[b]) {
      Rng rng(derive_seed(rng_seed, b, 1000));
      const auto& s = *shapes_.skips[b];
      skips_[b]->weight = kaiming_uniform({s.c_out, s.c_in, 1}, s.c_in, rng);
      skips_[b]->bias = Tensor(Shape{s.c_out});
    }
  }
}

std::size_t NasModel::searchable_count() const {
  std::size_t n = 0;
  for (const auto& block : layers_) {
    for (const auto& p : block) n += p.masks ? 1 : 0;
  }
  return n;
}

MaskTable NasModel::compute_mask_table() const {
  MaskTable table(layers_.size());
  for (std::size_t b = 0; b < layers_.size(); ++b) {
    table[b].resize(layers_[b].size());
    for (std::size_t m = 0; m < layers_[b].size(); ++m) {
      const auto& p = layers_[b][m];
      if (p.masks) table[b][m] = compute_masks(*p.masks, p.keep_one_channel);
    }
  }
  return table;
}

Tensor NasModel::forward(const Tensor& x, const ForwardOptions& options, std::vector<Tensor>* trace) {
  if (!options.use_masks) return forward(x, options, MaskTable(layers_.size()), trace);
  return forward(x, options, compute_mask_table(), trace);
}

Tensor NasModel::forward(const Tensor& x_in, const ForwardOptions& options, const MaskTable& table,
                         std::vector<Tensor>* trace) {
  if (x_in.rank() != 3 || x_in.dim(1) != spec_.input_channels || x_in.dim(2) != spec_.input_length) {
    throw ShapeError("model input must be [N, " + std::to_string(spec_.input_channels) + ", " +
                     std::to_string(spec_.input_length) + "], got " + shape_str(x_in.shape()));
  }
  const std::size_t n_batch = x_in.dim(0);
  const auto masks_of = [&](std::size_t b, std::size_t m) -> const MaskOutputs* {
    if (!options.use_masks || b >= table.size() || m >= table[b].size() || !table[b][m]) return nullptr;
    return &*table[b][m];
  };
  Tensor x = x_in;
  std::size_t flat = 0;
  for (std::size_t b = 0; b < spec_.blocks.size(); ++b) {
    const auto& block = spec_.blocks[b];
    const Tensor block_in = x;
    for (std::size_t m = 0; m < block.layers.size(); ++m, ++flat) {
      const auto& ls = block.layers[m];
      const auto& shape = shapes_.layers[b][m];
      auto& p = layers_[b][m];
      const MaskOutputs* mo = masks_of(b, m);
      Tensor y;
      switch (ls.kind) {
        case LayerKind::conv1d: {
          const Tensor w = mo ? apply_masks(p.weight, *mo) : p.weight;
          const Tensor bias = mo ? mul(p.bias, mo->a_bin) : p.bias;
          y = conv1d(x, w, bias, ls.stride, 1);
          break;
        }
        case LayerKind::fc: {
          const std::size_t features = shape.c_in * shape.t_in;
          Tensor w = p.weight;
          Tensor bias = p.bias;
          if (mo) {
            w = reshape(mask_weight(p.weight.view({shape.c_out, features, 1}), mo->a_bin, mo->tap_bin),
                        {shape.c_out, features});
            bias = mul(p.bias, mo->a_bin);
          }
          y = reshape(linear(reshape(x, {n_batch, features}), w, bias), {n_batch, shape.c_out, 1});
          break;
        }
        case LayerKind::avgpool:
          y = avgpool1d(x, ls.f_seed, ls.stride);
          break;
      }
      if (ls.batchnorm) {
        y = batchnorm1d(y, p.bn_weight, p.bn_shift, p.bn_stats, options.train);
        if (mo) y = mask_channels(y, mo->a_bin);
      }
      if (ls.activation == Activation::relu) y = relu(y);
      if (ls.dropout > 0.0) {
        DropoutKey key = options.dropout;
        key.layer = flat;
        y = dropout(y, ls.dropout, options.train, key);
      }
      x = y;
      if (trace) trace->push_back(x);
    }
    if (block.residual == Residual::identity) {
      x = add(x, block_in);
    } else if (block.residual == Residual::pointwise) {
      const auto& s = *skips_[b];
      const MaskOutputs* tied = masks_of(b, block.layers.size() - 1);
      Tensor w = s.weight;
      Tensor bias = s.bias;
      if (tied) {
        w = mask_weight(s.weight, tied->a_bin, Tensor(Shape{1}, 1.0));
        bias = mul(s.bias, tied->a_bin);
      }
      x = add(x, conv1d(block_in, w, bias, 1, 1));
    }
    if (trace && block.residual != Residual::none) trace->back() = x;
  }
  return reshape(x, {n_batch, spec_.outputs});
}

std::vector<ParamRef> NasModel::weight_params() {
  std::vector<ParamRef> out;
  for (auto& block : layers_) {
    for (auto& p : block) {
      for (Tensor* t : {&p.weight, &p.bias, &p.bn_weight, &p.bn_shift}) {
        if (t->defined()) out.push_back({*t, 0});
      }
    }
  }
  for (auto& s : skips_) {
    if (s) {
      out.push_back({s->weight, 0});
      out.push_back({s->bias, 0});
    }
  }
  return out;
}

std::vector<ParamRef> NasModel::mask_params() {
  std::vector<ParamRef> out;
  for (auto& block : layers_) {
    for (auto& p : block) {
      if (!p.masks) continue;
      out.push_back({p.masks->alpha, 0});
      out.push_back({p.masks->beta, 1});
      if (p.masks->gamma.defined()) out.push_back({p.masks->gamma, 1});
    }
  }
  return out;
}

void NasModel::set_weights_trainable(bool on) {
  for (auto& r : weight_params()) r.tensor.set_requires_grad(on);
}

void NasModel::set_masks_trainable(bool on) {
  for (auto& block : layers_) {
    for (auto& p : block) {
      if (p.masks) p.masks->set_trainable(on);
    }
  }
}

std::vector<std::pair<std::string, Tensor>> NasModel::named_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t b = 0; b < layers_.size(); ++b) {
    for (std::size_t m = 0; m < layers_[b].size(); ++m) {
      const auto& p = layers_[b][m];
      const std::string base = layer_name(b, m) + ".";
      if (p.weight.defined()) out.emplace_back(base + "weight", p.weight);
      if (p.bias.defined()) out.emplace_back(base + "bias", p.bias);
      if (p.bn_weight.defined()) {
        out.emplace_back(base + "bn_weight", p.bn_weight);
        out.emplace_back(base + "bn_shift", p.bn_shift);
        out.emplace_back(base + "bn_mean", from_vector(p.bn_stats.running_mean));
        out.emplace_back(base + "bn_var", from_vector(p.bn_stats.running_var));
      }
      if (p.masks) {
        out.emplace_back(base + "alpha", p.masks->alpha);
        out.emplace_back(base + "beta", p.masks->beta);
        if (p.masks->gamma.defined()) out.emplace_back(base + "gamma", p.masks->gamma);
      }
    }
    if (skips_[b]) {
      out.emplace_back(skip_name(b) + ".weight", skips_[b]->weight);
      out.emplace_back(skip_name(b) + ".bias", skips_[b]->bias);
    }
  }
  return out;
}

void NasModel::load_named(const std::vector<std::pair<std::string, Tensor>>& tensors) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : tensors) by_name[name] = &t;
  const auto copy_into = [&](const std::string& name, std::span<double> dst, const Shape& shape) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ShapeError("checkpoint is missing tensor '" + name + "'");
    if (it->second->shape() != shape) {
      throw ShapeError("checkpoint tensor '" + name + "' has shape " + shape_str(it->second->shape()) +
                       ", expected " + shape_str(shape));
    }
    const auto src = it->second->data();
    std::copy(src.begin(), src.end(), dst.begin());
  };
  const auto copy_tensor = [&](const std::string& name, Tensor& t) {
    if (t.defined()) copy_into(name, t.data(), t.shape());
  };
  for (std::size_t b = 0; b < layers_.size(); ++b) {
    for (std::size_t m = 0; m < layers_[b].size(); ++m) {
      auto& p = layers_[b][m];
      const std::string base = layer_name(b, m) + ".";
      copy_tensor(base + "weight", p.weight);
      copy_tensor(base + "bias", p.bias);
      if (p.bn_weight.defined()) {
        copy_tensor(base + "bn_weight", p.bn_weight);
        copy_tensor(base + "bn_shift", p.bn_shift);
        copy_into(base + "bn_mean", p.bn_stats.running_mean, Shape{p.bn_stats.running_mean.size()});
        copy_into(base + "bn_var", p.bn_stats.running_var, Shape{p.bn_stats.running_var.size()});
      }
      if (p.masks) {
        copy_tensor(base + "alpha", p.masks->alpha);
        copy_tensor(base + "beta", p.masks->beta);
        copy_tensor(base + "gamma", p.masks->gamma);
      }
    }
    if (skips_[b]) {
      copy_tensor(skip_name(b) + ".weight", skips_[b]->weight);
      copy_tensor(skip_name(b) + ".bias", skips_[b]->bias);
    }
  }
}

NasModel NasModel::clone() const {
  NasModel out = *this;
  const auto deep = [](Tensor& t) {
    if (!t.defined()) return;
    const bool rg = t.requires_grad();
    t = t.clone();
    t.set_requires_grad(rg);
  };
  for (auto& block : out.layers_) {
    for (auto& p : block) {
      deep(p.weight);
      deep(p.bias);
      deep(p.bn_weight);
      deep(p.bn_shift);
      if (p.masks) p.masks = p.masks->clone();
    }
  }
  for (auto& s : out.skips_) {
    if (s) {
      deep(s->weight);
      deep(s->bias);
    }
  }
  return out;
}

void NasModel::round_to_float() {
  for (auto& block : layers_) {
    for (auto& p : block) {
      round_tensor(p.weight);
      round_tensor(p.bias);
      round_tensor(p.bn_weight);
      round_tensor(p.bn_shift);
      round_vector(p.bn_stats.running_mean);
      round_vector(p.bn_stats.running_var);
      if (p.masks) {
        round_tensor(p.masks->alpha);
        round_tensor(p.masks->beta);
        round_tensor(p.masks->gamma);
      }
    }
  }
  for (auto& s : skips_) {
    if (s) {
      round_tensor(s->weight);
      round_tensor(s->bias);
    }
  }
}

}  // namespace pit
