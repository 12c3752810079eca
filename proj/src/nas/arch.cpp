#include "pit/arch.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "pit/rng.hpp"

namespace pit {

namespace {

std::vector<std::size_t> iota_vec(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::vector<std::size_t> sorted_union(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::vector<std::size_t> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

Tensor slice_vector(const Tensor& t, const std::vector<std::size_t>& idx) {
  Tensor out(Shape{idx.size()});
  for (std::size_t a = 0; a < idx.size(); ++a) out[a] = t[idx[a]];
  return out;
}

std::vector<double> slice_vector(const std::vector<double>& v, const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

std::vector<std::size_t> positions_in(const std::vector<std::size_t>& sub, const std::vector<std::size_t>& all) {
  std::vector<std::size_t> pos;
  for (std::size_t c : sub) pos.push_back(static_cast<std::size_t>(std::lower_bound(all.begin(), all.end(), c) - all.begin()));
  return pos;
}

}  // namespace

EffectiveArch extract(const NasModel& model) { return extract(model, model.compute_mask_table()); }

EffectiveArch extract(const NasModel& model, const MaskTable& table) {
  const auto& spec = model.spec();
  const auto& shapes = model.shapes();
  EffectiveArch arch;
  std::vector<std::size_t> live = iota_vec(spec.input_channels);
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& block = spec.blocks[b];
    const std::vector<std::size_t> block_live = live;
    for (std::size_t m = 0; m < block.layers.size(); ++m) {
      const auto& ls = block.layers[m];
      const auto& shape = shapes.layers[b][m];
      const MaskOutputs* mo = table.at(b).at(m) ? &*table[b][m] : nullptr;
      ArchLayer L;
      L.name = layer_name(b, m);
      L.kind = ls.kind;
      L.searchable = mo != nullptr;
      L.input_channels = live;
      L.stride = ls.stride;
      L.t_out = shape.t_out;
      switch (ls.kind) {
        case LayerKind::conv1d:
        case LayerKind::fc:
          if (mo) {
            const BinaryLayerShape bs = binary_layer_shape(*mo);
            L.kept_channels = bs.kept_channels;
            L.kept_taps = bs.kept_taps;
            L.kernel_size = bs.kernel_size;
            L.dilation = bs.dilation;
            L.receptive_field = bs.receptive_field;
          } else {
            L.kept_channels = iota_vec(shape.c_out);
            const std::size_t f = ls.kind == LayerKind::conv1d ? ls.f_seed : 1;
            L.kept_taps = iota_vec(f);
            L.kernel_size = f;
            L.receptive_field = f;
          }
          L.c_in = live.size() * (ls.kind == LayerKind::fc ? shape.t_in : 1);
          break;
        case LayerKind::avgpool:
          L.kept_channels = live;
          L.kernel_size = L.receptive_field = ls.f_seed;
          L.c_in = live.size();
          break;
      }
      L.c_out = L.kept_channels.size();
      L.eliminated = L.searchable && L.kept_channels.empty();
      live = L.kept_channels;
      arch.layers.push_back(std::move(L));
    }
    if (block.residual == Residual::identity) {
      live = sorted_union(live, block_live);
    } else if (block.residual == Residual::pointwise) {
      arch.skips.push_back({skip_name(b), block_live, live, shapes.skips[b]->t_out});
    }
  }
  const IntegerCosts totals = count(arch);
  arch.params_weights_only = totals.weights;
  arch.params_with_bias = totals.with_bias;
  arch.macs = totals.macs;
  return arch;
}

IntegerCosts count(const EffectiveArch& arch) {
  IntegerCosts out;
  const auto charge = [&](std::uint64_t weights, std::uint64_t biases, std::uint64_t t) {
    out.weights += weights;
    out.with_bias += weights + biases;
    out.macs += weights * t;
  };
  for (const auto& L : arch.layers) {
    if (L.kind == LayerKind::avgpool) continue;
    charge(static_cast<std::uint64_t>(L.c_in) * L.c_out * L.kernel_size, L.c_out, L.t_out);
  }
  for (const auto& s : arch.skips) {
    charge(static_cast<std::uint64_t>(s.input_channels.size()) * s.kept_channels.size(), s.kept_channels.size(),
           s.t_out);
  }
  return out;
}

std::string serialize_arch(const EffectiveArch& arch) {
  std::ostringstream os;
  os << "[totals]\n"
     << "params_weights_only = " << arch.params_weights_only << "\n"
     << "params_with_bias = " << arch.params_with_bias << "\n"
     << "macs = " << arch.macs << "\n";
  for (std::size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& L = arch.layers[i];
    os << "\n[layer." << i << "]\n"
       << "name = " << L.name << "\n"
       << "kind = " << to_string(L.kind) << "\n"
       << "searchable = " << (L.searchable ? "true" : "false") << "\n"
       << "c_in = " << L.c_in << "\n"
       << "c_out = " << L.c_out << "\n"
       << "k = " << L.kernel_size << "\n"
       << "d = " << L.dilation << "\n"
       << "f = " << L.receptive_field << "\n"
       << "stride = " << L.stride << "\n"
       << "t_out = " << L.t_out << "\n"
       << "input = " << join(L.input_channels) << "\n"
       << "kept = " << join(L.kept_channels) << "\n"
       << "taps = " << join(L.kept_taps) << "\n"
       << "eliminated = " << (L.eliminated ? "true" : "false") << "\n";
  }
  for (std::size_t i = 0; i < arch.skips.size(); ++i) {
    const auto& s = arch.skips[i];
    os << "\n[skip." << i << "]\n"
       << "name = " << s.name << "\n"
       << "input = " << join(s.input_channels) << "\n"
       << "kept = " << join(s.kept_channels) << "\n"
       << "t_out = " << s.t_out << "\n";
  }
  return os.str();
}

EffectiveArch parse_arch(const IniDocument& doc) {
  EffectiveArch arch;
  const IniSection* totals = doc.find("totals");
  if (!totals) throw ConfigError(doc.origin() + ": missing [totals] section");
  arch.params_weights_only = totals->get_size("params_weights_only");
  arch.params_with_bias = totals->get_size("params_with_bias");
  arch.macs = totals->get_size("macs");
  totals->reject_unused();
  const auto indexed = [&](const std::string& prefix) {
    std::vector<const IniSection*> out;
    for (std::size_t i = 0;; ++i) {
      const IniSection* s = doc.find(prefix + std::to_string(i));
      if (!s) break;
      out.push_back(s);
    }
    return out;
  };
  for (const IniSection* s : indexed("layer.")) {
    ArchLayer L;
    L.name = s->get_string("name");
    const std::string kind = s->get_string("kind");
    if (kind == "conv1d") {
      L.kind = LayerKind::conv1d;
    } else if (kind == "fc") {
      L.kind = LayerKind::fc;
    } else if (kind == "avgpool") {
      L.kind = LayerKind::avgpool;
    } else {
      throw ConfigError(doc.origin() + ": unknown layer kind '" + kind + "'");
    }
    L.searchable = s->get_bool("searchable");
    L.c_in = s->get_size("c_in");
    L.c_out = s->get_size("c_out");
    L.kernel_size = s->get_size("k");
    L.dilation = s->get_size("d");
    L.receptive_field = s->get_size("f");
    L.stride = s->get_size("stride");
    L.t_out = s->get_size("t_out");
    L.input_channels = s->get_size_list("input");
    L.kept_channels = s->get_size_list("kept");
    L.kept_taps = s->get_size_list("taps");
    L.eliminated = s->get_bool("eliminated");
    s->reject_unused();
    if (L.kind != LayerKind::avgpool &&
        (L.dilation == 0 || L.receptive_field != L.dilation * (L.kernel_size - 1) + 1)) {
      throw ConfigError(doc.origin() + ": layer " + L.name + " violates F = d * (K - 1) + 1");
    }
    arch.layers.push_back(std::move(L));
  }
  for (const IniSection* s : indexed("skip.")) {
    ArchSkip k;
    k.name = s->get_string("name");
    k.input_channels = s->get_size_list("input");
    k.kept_channels = s->get_size_list("kept");
    k.t_out = s->get_size("t_out");
    s->reject_unused();
    arch.skips.push_back(std::move(k));
  }
  if (arch.layers.empty()) throw ConfigError(doc.origin() + ": architecture has no layers");
  return arch;
}

std::string format_arch_table(const EffectiveArch& arch) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "layer" << std::setw(9) << "kind" << std::right << std::setw(7) << "c_in"
     << std::setw(7) << "c_out" << std::setw(5) << "F" << std::setw(5) << "d" << std::setw(5) << "K"
     << std::setw(7) << "T" << std::setw(10) << "weights" << "\n";
  for (const auto& L : arch.layers) {
    const std::uint64_t w = L.kind == LayerKind::avgpool ? 0 : static_cast<std::uint64_t>(L.c_in) * L.c_out * L.kernel_size;
    os << std::left << std::setw(16) << L.name << std::setw(9) << to_string(L.kind) << std::right << std::setw(7)
       << L.c_in << std::setw(7) << L.c_out << std::setw(5) << L.receptive_field << std::setw(5) << L.dilation
       << std::setw(5) << L.kernel_size << std::setw(7) << L.t_out << std::setw(10) << w
       << (L.eliminated ? "  eliminated" : "") << "\n";
  }
  for (const auto& s : arch.skips) {
    os << std::left << std::setw(16) << s.name << std::setw(9) << "skip" << std::right << std::setw(7)
       << s.input_channels.size() << std::setw(7) << s.kept_channels.size() << std::setw(5) << 1 << std::setw(5)
       << 1 << std::setw(5) << 1 << std::setw(7) << s.t_out << std::setw(10)
       << s.input_channels.size() * s.kept_channels.size() << "\n";
  }
  os << "weights " << arch.params_weights_only << ", with biases " << arch.params_with_bias << ", MACs "
     << arch.macs << "\n";
  return os.str();
}

ConcreteModel materialize(const NasModel& model, const EffectiveArch& arch) {
  const auto& spec = model.spec();
  const auto& shapes = model.shapes();
  std::vector<ConcreteBlock> blocks;
  std::size_t flat = 0, skip_i = 0;
  for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
    const auto& block = spec.blocks[b];
    ConcreteBlock cb;
    cb.residual = block.residual;
    for (std::size_t m = 0; m < block.layers.size(); ++m, ++flat) {
      const auto& ls = block.layers[m];
      const auto& shape = shapes.layers[b][m];
      const ArchLayer& A = arch.layers.at(flat);
      if (A.name != layer_name(b, m)) throw std::logic_error("architecture does not match the model: " + A.name);
      const LayerParams& p = model.layer(b, m);
      ConcreteLayer L;
      L.kind = ls.kind;
      L.stride = ls.stride;
      L.dilation = A.dilation;
      L.window = ls.f_seed;
      L.batchnorm = ls.batchnorm;
      L.activation = ls.activation;
      L.dropout = ls.dropout;
      L.out_index = A.kept_channels;
      L.seed_channels = shape.c_out;
      if (m == 0) cb.in_index = A.input_channels;
      const std::size_t co = A.kept_channels.size(), ci = A.input_channels.size();
      if (ls.kind == LayerKind::conv1d) {
        const std::size_t k = A.kept_taps.size(), f_seed = ls.f_seed, ci_seed = shape.c_in;
        L.weight = Tensor(Shape{co, ci, k});
        for (std::size_t a = 0; a < co; ++a) {
          for (std::size_t l = 0; l < ci; ++l) {
            for (std::size_t j = 0; j < k; ++j) {
              L.weight[(a * ci + l) * k + j] =
                  p.weight[(A.kept_channels[a] * ci_seed + A.input_channels[l]) * f_seed + A.kept_taps[j]];
            }
          }
        }
      } else if (ls.kind == LayerKind::fc) {
        const std::size_t t = shape.t_in, seed_features = shape.c_in * t;
        L.weight = Tensor(Shape{co, ci * t});
        for (std::size_t a = 0; a < co; ++a) {
          for (std::size_t l = 0; l < ci; ++l) {
            for (std::size_t s = 0; s < t; ++s) {
              L.weight[a * ci * t + l * t + s] = p.weight[A.kept_channels[a] * seed_features + A.input_channels[l] * t + s];
            }
          }
        }
      }
      if (p.bias.defined()) L.bias = slice_vector(p.bias, A.kept_channels);
      if (ls.batchnorm) {
        L.bn_weight = slice_vector(p.bn_weight, A.kept_channels);
        L.bn_shift = slice_vector(p.bn_shift, A.kept_channels);
        L.bn_stats.running_mean = slice_vector(p.bn_stats.running_mean, A.kept_channels);
        L.bn_stats.running_var = slice_vector(p.bn_stats.running_var, A.kept_channels);
      }
      cb.out_index = A.kept_channels;
      cb.layers.push_back(std::move(L));
    }
    if (block.residual == Residual::identity) {
      cb.out_index = sorted_union(cb.out_index, cb.in_index);
    } else if (block.residual == Residual::pointwise) {
      const ArchSkip& S = arch.skips.at(skip_i++);
      const auto& sp = *model.skip(b);
      const std::size_t co = S.kept_channels.size(), ci = S.input_channels.size();
      const std::size_t ci_seed = shapes.skips[b]->c_in;
      cb.skip_weight = Tensor(Shape{co, ci, 1});
      for (std::size_t a = 0; a < co; ++a) {
        for (std::size_t l = 0; l < ci; ++l) {
          cb.skip_weight[a * ci + l] = sp.weight[S.kept_channels[a] * ci_seed + S.input_channels[l]];
        }
      }
      cb.skip_bias = slice_vector(sp.bias, S.kept_channels);
    }
    blocks.push_back(std::move(cb));
  }
  return ConcreteModel(spec, std::move(blocks));
}

Tensor ConcreteModel::forward(const Tensor& x_in, const ForwardOptions& options, std::vector<Tensor>* trace) {
  const std::size_t n_batch = x_in.dim(0);
  const auto seed_layout = [](const Tensor& y, const ConcreteLayer& L, const std::vector<std::size_t>& index) {
    return scatter_channels(y, index, L.seed_channels);
  };
  Tensor x = x_in;
  std::size_t flat = 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto& cb = blocks_[b];
    const Tensor block_in = x;
    for (std::size_t m = 0; m < cb.layers.size(); ++m, ++flat) {
      auto& L = cb.layers[m];
      Tensor y;
      switch (L.kind) {
        case LayerKind::conv1d:
          y = conv1d(x, L.weight, L.bias, L.stride, L.dilation);
          break;
        case LayerKind::fc:
          y = reshape(linear(reshape(x, {n_batch, x.dim(1) * x.dim(2)}), L.weight, L.bias),
                      {n_batch, L.weight.dim(0), 1});
          break;
        case LayerKind::avgpool:
          y = avgpool1d(x, L.window, L.stride);
          break;
      }
      if (L.batchnorm) y = batchnorm1d(y, L.bn_weight, L.bn_shift, L.bn_stats, options.train);
      if (L.activation == Activation::relu) y = relu(y);
      if (L.dropout > 0.0) {
        DropoutKey key = options.dropout;
        key.layer = flat;
        y = dropout(y, L.dropout, options.train, key);
      }
      x = y;
      if (trace) trace->push_back(seed_layout(x, L, L.out_index));
    }
    if (cb.residual == Residual::identity) {
      const auto& main_index = cb.layers.back().out_index;
      Tensor main = main_index == cb.out_index
                        ? x
                        : scatter_channels(x, positions_in(main_index, cb.out_index), cb.out_index.size());
      Tensor skip = cb.in_index == cb.out_index
                        ? block_in
                        : scatter_channels(block_in, positions_in(cb.in_index, cb.out_index), cb.out_index.size());
      x = add(main, skip);
    } else if (cb.residual == Residual::pointwise) {
      x = add(x, conv1d(block_in, cb.skip_weight, cb.skip_bias, 1, 1));
    }
    if (trace && cb.residual != Residual::none) {
      trace->back() = seed_layout(x, cb.layers.back(), cb.out_index);
    }
  }
  return reshape(x, {n_batch, seed_.outputs});
}

IntegerCosts ConcreteModel::count() const {
  IntegerCosts out;
  const ShapeTable shapes = propagate_shapes(seed_);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& cb = blocks_[b];
    for (std::size_t m = 0; m < cb.layers.size(); ++m) {
      const auto& L = cb.layers[m];
      if (!L.weight.defined()) continue;
      out.weights += L.weight.numel();
      out.with_bias += L.weight.numel() + (L.bias.defined() ? L.bias.numel() : 0);
      out.macs += L.weight.numel() * shapes.layers[b][m].t_out;
    }
    if (cb.skip_weight.defined()) {
      out.weights += cb.skip_weight.numel();
      out.with_bias += cb.skip_weight.numel() + cb.skip_bias.numel();
      out.macs += cb.skip_weight.numel() * shapes.skips[b]->t_out;
    }
  }
  return out;
}

EffectiveArch ConcreteModel::arch() const {
  EffectiveArch arch;
  const ShapeTable shapes = propagate_shapes(seed_);
  std::vector<std::size_t> live = iota_vec(seed_.input_channels);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& cb = blocks_[b];
    const auto& block = seed_.blocks[b];
    for (std::size_t m = 0; m < cb.layers.size(); ++m) {
      const auto& L = cb.layers[m];
      const auto& ls = block.layers[m];
      ArchLayer A;
      A.name = layer_name(b, m);
      A.kind = L.kind;
      A.searchable = has_masks(ls);
      A.input_channels = live;
      A.kept_channels = L.out_index;
      A.stride = L.stride;
      A.t_out = shapes.layers[b][m].t_out;
      if (L.kind == LayerKind::avgpool) {
        A.kernel_size = A.receptive_field = L.window;
        A.c_in = live.size();
      } else {
        A.c_in = L.weight.dim(1);
        A.kernel_size = L.kind == LayerKind::conv1d ? L.weight.dim(2) : 1;
        A.dilation = L.dilation;
        A.receptive_field = A.dilation * (A.kernel_size - 1) + 1;
        for (std::size_t j = 0; j < A.kernel_size; ++j) A.kept_taps.push_back(j * A.dilation);
      }
      A.c_out = L.kind == LayerKind::avgpool ? live.size() : L.weight.dim(0);
      A.eliminated = A.searchable && A.c_out == 0;
      live = L.out_index;
      arch.layers.push_back(std::move(A));
    }
    if (cb.residual == Residual::pointwise) {
      arch.skips.push_back({skip_name(b), cb.in_index, cb.layers.back().out_index, shapes.skips[b]->t_out});
    }
    live = cb.out_index;
  }
  const IntegerCosts totals = pit::count(arch);
  arch.params_weights_only = totals.weights;
  arch.params_with_bias = totals.with_bias;
  arch.macs = totals.macs;
  return arch;
}

std::vector<std::pair<std::string, Tensor>> ConcreteModel::named_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& cb = blocks_[b];
    for (std::size_t m = 0; m < cb.layers.size(); ++m) {
      const auto& L = cb.layers[m];
      const std::string base = layer_name(b, m) + ".";
      if (L.weight.defined()) out.emplace_back(base + "weight", L.weight);
      if (L.bias.defined()) out.emplace_back(base + "bias", L.bias);
      if (L.batchnorm) {
        out.emplace_back(base + "bn_weight", L.bn_weight);
        out.emplace_back(base + "bn_shift", L.bn_shift);
        out.emplace_back(base + "bn_mean", Tensor(Shape{L.bn_stats.running_mean.size()}, L.bn_stats.running_mean));
        out.emplace_back(base + "bn_var", Tensor(Shape{L.bn_stats.running_var.size()}, L.bn_stats.running_var));
      }
    }
    if (cb.skip_weight.defined()) {
      out.emplace_back(skip_name(b) + ".weight", cb.skip_weight);
      out.emplace_back(skip_name(b) + ".bias", cb.skip_bias);
    }
  }
  return out;
}

EquivalenceReport verify_equivalence(NasModel& masked, ConcreteModel& pruned, std::size_t trials, double tol,
                                     std::uint64_t rng_seed) {
  const auto& spec = masked.spec();
  EquivalenceReport report;
  report.trials = trials;
  report.tolerance = tol;
  if (trials == 0) return report;
  Rng rng(rng_seed);
  Tensor x(Shape{trials, spec.input_channels, spec.input_length});
  for (double& v : x.data()) v = rng.normal();
  ForwardOptions eval;
  eval.train = false;
  const Tensor a = masked.forward(x, eval);
  const Tensor b = pruned.forward(x, eval);
  const std::size_t per = spec.outputs;
  for (std::size_t n = 0; n < trials; ++n) {
    for (std::size_t j = 0; j < per; ++j) {
      const double diff = std::fabs(a[n * per + j] - b[n * per + j]);
      if (!(diff <= report.max_abs_diff)) {
        report.max_abs_diff = std::isnan(diff) ? INFINITY : diff;
        report.worst_trial = n;
      }
    }
  }
  report.passed = report.max_abs_diff <= tol;
  if (report.passed) return report;

  Tensor worst(Shape{1, spec.input_channels, spec.input_length});
  const std::size_t sample = spec.input_channels * spec.input_length;
  std::copy_n(x.data().begin() + report.worst_trial * sample, sample, worst.data().begin());
  std::vector<Tensor> ta, tb;
  masked.forward(worst, eval, &ta);
  pruned.forward(worst, eval, &tb);
  const auto diverges = [&](std::size_t i) {
    double d = 0.0;
    for (std::size_t k = 0; k < ta[i].numel(); ++k) d = std::max(d, std::fabs(ta[i][k] - tb[i][k]));
    return !(d <= tol);
  };
  std::size_t lo = 0, hi = ta.size() - 1;  // the last layer diverges
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (diverges(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  std::size_t flat = 0;
  for (std::size_t bb = 0; bb < spec.blocks.size(); ++bb) {
    for (std::size_t m = 0; m < spec.blocks[bb].layers.size(); ++m, ++flat) {
      if (flat == lo) report.failing_layer = layer_name(bb, m);
    }
  }
  return report;
}

CapExceeded::CapExceeded(std::uint64_t bound, std::uint64_t cap)
    : std::runtime_error("search space holds " + std::to_string(bound) + " architectures, above the cap of " +
                         std::to_string(cap)),
      bound_(bound) {}

std::vector<LayerChoice> layer_choices(std::size_t c_out_seed, std::size_t f_seed) {
  std::set<std::pair<std::size_t, std::size_t>> shapes;
  const std::size_t len = f_seed >= 2 ? gamma_length(f_seed) : 1;
  for (std::size_t fb = 1; fb <= f_seed; ++fb) {
    for (std::size_t zeros = 0; zeros < len; ++zeros) {
      const std::size_t step = std::size_t{1} << zeros;
      const std::size_t last = (fb - 1) / step * step;
      shapes.emplace(last + 1, last == 0 ? 1 : step);
    }
  }
  std::vector<LayerChoice> out;
  for (const auto& [f, d] : shapes) {
    for (std::size_t c = 1; c <= c_out_seed; ++c) out.push_back({c, f, d});
  }
  std::sort(out.begin(), out.end());
  return out;
}

double search_space_formula(const std::vector<std::pair<std::size_t, std::size_t>>& layers) {
  double total = 1.0;
  for (const auto& [c, f] : layers) {
    total *= static_cast<double>(c) * static_cast<double>(f) *
             static_cast<double>(std::max<std::size_t>(1, f >= 2 ? gamma_length(f) : 0));
  }
  return total;
}

SearchSpaceCount enumerate_search_space(const NetworkSpec& spec, std::uint64_t cap,
                                        const std::function<void(const std::vector<LayerChoice>&)>& visit) {
  propagate_shapes(spec);
  std::vector<std::vector<LayerChoice>> choices;
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  for (const auto& block : spec.blocks) {
    for (const auto& ls : block.layers) {
      if (!has_masks(ls)) continue;
      const std::size_t f = ls.kind == LayerKind::conv1d ? ls.f_seed : 1;
      choices.push_back(layer_choices(ls.c_out, f));
      dims.emplace_back(ls.c_out, f);
    }
  }
  SearchSpaceCount result;
  result.formula = search_space_formula(dims);
  std::uint64_t bound = 1;
  bool overflow = false;
  for (const auto& c : choices) {
    result.per_layer.push_back(c.size());
    if (bound > std::numeric_limits<std::uint64_t>::max() / c.size()) {
      overflow = true;
      bound = std::numeric_limits<std::uint64_t>::max();
    } else if (!overflow) {
      bound *= c.size();
    }
  }
  if (overflow || bound > cap) throw CapExceeded(bound, cap);
  std::vector<std::size_t> odometer(choices.size(), 0);
  std::vector<LayerChoice> current(choices.size());
  std::uint64_t visited = 0;
  while (true) {
    for (std::size_t i = 0; i < choices.size(); ++i) current[i] = choices[i][odometer[i]];
    if (visit) visit(current);
    ++visited;
    std::size_t i = 0;
    while (i < odometer.size() && ++odometer[i] == choices[i].size()) odometer[i++] = 0;
    if (i == odometer.size()) break;
  }
  result.exact = visited;
  return result;
}

}  // namespace pit
