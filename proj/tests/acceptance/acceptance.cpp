// Acceptance runner: one PASS/FAIL/SKIP line per criterion.
//
//   pit_acceptance [--only 1,2,...] [--ecg-dir DIR]
//
// Exit status 0 when every selected criterion passes, 1 on any failure, 77
// when every selected criterion was skipped.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "grad_check.hpp"
#include "pit/arch.hpp"
#include "pit/cost.hpp"
#include "pit/oracles.hpp"
#include "pit/rng.hpp"
#include "pit/run_config.hpp"
#include "pit/search.hpp"

using namespace pit;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
  Status status = Status::pass;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Shared helpers

LayerSpec conv_layer(std::size_t c_out, std::size_t f, std::size_t stride, bool bn, bool relu, double drop) {
  LayerSpec l;
  l.c_out = c_out;
  l.f_seed = f;
  l.stride = stride;
  l.batchnorm = bn;
  l.activation = relu ? Activation::relu : Activation::none;
  l.dropout = drop;
  return l;
}

LayerSpec head_layer(std::size_t n) {
  LayerSpec l;
  l.kind = LayerKind::fc;
  l.c_out = n;
  l.searchable = false;
  return l;
}

// Small random topology: plain, identity-residual and pointwise-residual
// blocks, optional pooling and a searchable hidden fc layer.
NetworkSpec random_spec(Rng& rng) {
  NetworkSpec spec;
  spec.input_channels = 1 + rng.below(3);
  spec.input_length = 8 + rng.below(17);
  spec.outputs = 2 + rng.below(3);
  std::size_t c = spec.input_channels, t = spec.input_length;
  const std::size_t body = 1 + rng.below(3);
  for (std::size_t b = 0; b < body; ++b) {
    BlockSpec block;
    const std::size_t kind = rng.below(3);
    block.residual = kind == 0 ? Residual::none : (kind == 1 ? Residual::identity : Residual::pointwise);
    const std::size_t n_layers = 1 + rng.below(2);
    for (std::size_t m = 0; m < n_layers; ++m) {
      const bool last = m + 1 == n_layers;
      std::size_t c_out = 1 + rng.below(6);
      if (block.residual == Residual::identity && last) c_out = c;
      const std::size_t stride = block.residual == Residual::none && t >= 4 ? 1 + rng.below(2) : 1;
      block.layers.push_back(conv_layer(c_out, 1 + rng.below(9), stride, rng.uniform() < 0.5, rng.uniform() < 0.7,
                                        rng.uniform() < 0.3 ? 0.2 : 0.0));
      t = (t + stride - 1) / stride;
      if (block.residual != Residual::identity || last) c = c_out;
    }
    if (block.residual == Residual::identity) c = block.layers.back().c_out;
    spec.blocks.push_back(block);
  }
  BlockSpec tail;
  if (t >= 4 && rng.uniform() < 0.4) {
    LayerSpec pool;
    pool.kind = LayerKind::avgpool;
    pool.f_seed = 2;
    pool.stride = 2;
    pool.searchable = false;
    tail.layers.push_back(pool);
  }
  if (rng.uniform() < 0.3) {
    LayerSpec hidden;
    hidden.kind = LayerKind::fc;
    hidden.c_out = 2 + rng.below(5);
    hidden.activation = Activation::relu;
    tail.layers.push_back(hidden);
  }
  tail.layers.push_back(head_layer(spec.outputs));
  spec.blocks.push_back(tail);
  propagate_shapes(spec);
  return spec;
}

Tensor random_input(const NetworkSpec& spec, std::size_t n, Rng& rng) {
  Tensor x(Shape{n, spec.input_channels, spec.input_length});
  for (double& v : x.data()) v = rng.normal();
  return x;
}

void randomize_batchnorm(NasModel& model, Rng& rng) {
  for (std::size_t b = 0; b < model.spec().blocks.size(); ++b) {
    for (std::size_t m = 0; m < model.spec().blocks[b].layers.size(); ++m) {
      auto& p = model.layer(b, m);
      if (p.bias.defined()) {
        for (double& v : p.bias.data()) v = rng.uniform(-0.5, 0.5);
      }
      if (!p.bn_weight.defined()) continue;
      for (double& v : p.bn_weight.data()) v = rng.uniform(0.5, 1.5);
      for (double& v : p.bn_shift.data()) v = rng.uniform(-0.5, 0.5);
      for (double& v : p.bn_stats.running_mean) v = rng.uniform(-0.5, 0.5);
      for (double& v : p.bn_stats.running_var) v = rng.uniform(0.5, 2.0);
    }
    if (auto& s = model.skip(b)) {
      for (double& v : s->bias.data()) v = rng.uniform(-0.5, 0.5);
    }
  }
}

void randomize_masks(NasModel& model, Rng& rng) {
  for (auto& p : model.mask_params()) {
    for (std::size_t i = p.frozen_prefix; i < p.tensor.numel(); ++i) {
      p.tensor[i] = rng.uniform() < 0.35 ? rng.uniform(-0.45, 0.45) : rng.uniform(0.55, 1.2);
    }
  }
}

// ---------------------------------------------------------------------------
// 1. Init identity

Outcome criterion_init_identity() {
  Rng rng(1001);
  std::vector<NetworkSpec> specs{builtin_seed("ecg_tcn")};
  for (int i = 0; i < 20; ++i) specs.push_back(random_spec(rng));
  std::size_t forward_ok = 0, cost_ok = 0;
  std::string first_failure;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    NasModel model = NasModel::build(specs[i], 100 + i);
    randomize_batchnorm(model, rng);
    const Tensor x = random_input(specs[i], 3, rng);
    ForwardOptions plain;
    plain.use_masks = false;
    const Tensor masked = model.forward(x, ForwardOptions{});
    const Tensor reference = model.forward(x, plain);
    const bool same = masked.shape() == reference.shape() &&
                      std::memcmp(masked.data().data(), reference.data().data(),
                                  masked.numel() * sizeof(double)) == 0;
    forward_ok += same;
    const CostBreakdown c = compute_costs(model);
    const IntegerCosts n = count(extract(model));
    const bool costs = c.r_size.item() == static_cast<double>(n.weights) &&
                       c.r_ops.item() == static_cast<double>(n.macs);
    cost_ok += costs;
    if ((!same || !costs) && first_failure.empty()) first_failure = ", first failure: spec " + std::to_string(i);
  }
  const bool ok = forward_ok == specs.size() && cost_ok == specs.size();
  return verdict(ok, std::to_string(forward_ok) + "/" + std::to_string(specs.size()) +
                         " bit-exact forwards, " + std::to_string(cost_ok) + "/" + std::to_string(specs.size()) +
                         " exact size/ops counts" + first_failure);
}

// ---------------------------------------------------------------------------
// 2. Gradient suite

Tensor rand_t(Shape s, Rng& rng, bool grad = true, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(s));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  t.set_requires_grad(grad);
  return t;
}

Tensor away_from_zero(Shape s, Rng& rng) {
  Tensor t = rand_t(std::move(s), rng);
  for (double& v : t.data()) v += v >= 0 ? 0.05 : -0.05;
  return t;
}

Tensor probe(const Tensor& y) {
  Tensor w(y.shape());
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = std::sin(0.7 * static_cast<double>(i) + 0.3);
  return sum(mul(y, w));
}

using LossFn = std::function<Tensor(const std::vector<Tensor>&)>;
struct GradCase {
  std::string name;
  std::vector<Tensor> inputs;
  LossFn loss;
};

std::vector<GradCase> op_cases(Rng& rng) {
  std::vector<GradCase> cases;
  const std::size_t n = 1 + rng.below(3), c = 1 + rng.below(5), t = 2 + rng.below(10);
  const Shape s{n, c, t};
  const std::size_t co = 1 + rng.below(4), k = 1 + rng.below(4), stride = 1 + rng.below(3), d = 1 + rng.below(3);
  cases.push_back({"conv1d", {rand_t(s, rng), rand_t({co, c, k}, rng), rand_t({co}, rng)},
                   [=](const auto& in) { return probe(conv1d(in[0], in[1], in[2], stride, d)); }});
  cases.push_back({"linear", {rand_t({n, c * t}, rng), rand_t({co, c * t}, rng), rand_t({co}, rng)},
                   [](const auto& in) { return probe(linear(in[0], in[1], in[2])); }});
  cases.push_back({"matvec", {rand_t({c}, rng), rand_t({co, c}, rng)},
                   [](const auto& in) { return probe(matvec(in[1], in[0])); }});
  cases.push_back({"relu", {away_from_zero(s, rng)}, [](const auto& in) { return probe(relu(in[0])); }});
  cases.push_back({"abs", {away_from_zero(s, rng)}, [](const auto& in) { return probe(abs(in[0])); }});
  cases.push_back({"add", {rand_t(s, rng), rand_t(s, rng)}, [](const auto& in) { return probe(add(in[0], in[1])); }});
  cases.push_back({"sub", {rand_t(s, rng), rand_t(s, rng)}, [](const auto& in) { return probe(sub(in[0], in[1])); }});
  cases.push_back({"mul", {rand_t(s, rng), rand_t(s, rng)}, [](const auto& in) { return probe(mul(in[0], in[1])); }});
  cases.push_back({"scale", {rand_t(s, rng)}, [](const auto& in) { return probe(scale(in[0], -1.7)); }});
  cases.push_back({"divide", {rand_t(s, rng)}, [](const auto& in) {
                     Tensor denom(in[0].shape());
                     for (std::size_t i = 0; i < denom.numel(); ++i) denom[i] = 1.0 + static_cast<double>(i % 5);
                     return probe(divide(in[0], denom));
                   }});
  cases.push_back({"add_scalar", {rand_t(s, rng)}, [](const auto& in) { return probe(add_scalar(in[0], 0.4)); }});
  cases.push_back({"clamp_max", {away_from_zero(s, rng)}, [](const auto& in) { return probe(clamp_max(in[0], 0.0)); }});
  cases.push_back({"sum", {rand_t(s, rng)}, [](const auto& in) { return scale(sum(in[0]), 0.3); }});
  cases.push_back({"mask_weight", {rand_t({co, c, k}, rng), rand_t({co}, rng), rand_t({k}, rng)},
                   [](const auto& in) { return probe(mask_weight(in[0], in[1], in[2])); }});
  cases.push_back({"mask_channels", {rand_t(s, rng), rand_t({c}, rng)},
                   [](const auto& in) { return probe(mask_channels(in[0], in[1])); }});
  cases.push_back({"scatter_channels", {rand_t(s, rng)}, [c](const auto& in) {
                     std::vector<std::size_t> idx(c);
                     for (std::size_t j = 0; j < c; ++j) idx[j] = 2 * j;
                     return probe(scatter_channels(in[0], idx, 2 * c));
                   }});
  cases.push_back({"reshape", {rand_t(s, rng)},
                   [](const auto& in) { return probe(relu(add_scalar(reshape(in[0], {in[0].numel()}), 2.0))); }});
  cases.push_back({"batchnorm1d(train)", {rand_t({n + 1, c, t}, rng), rand_t({c}, rng), rand_t({c}, rng)},
                   [](const auto& in) {
                     BatchNormStats st(in[0].dim(1));
                     return probe(batchnorm1d(in[0], in[1], in[2], st, true));
                   }});
  cases.push_back({"batchnorm1d(eval)", {rand_t(s, rng), rand_t({c}, rng), rand_t({c}, rng)}, [](const auto& in) {
                     BatchNormStats st(in[0].dim(1));
                     st.running_mean.assign(st.running_mean.size(), 0.2);
                     st.running_var.assign(st.running_var.size(), 1.7);
                     return probe(batchnorm1d(in[0], in[1], in[2], st, false));
                   }});
  cases.push_back({"avgpool1d", {rand_t(s, rng)}, [](const auto& in) {
                     const std::size_t w = std::min<std::size_t>(2, in[0].dim(2));
                     return probe(avgpool1d(in[0], w, w));
                   }});
  cases.push_back({"dropout", {rand_t(s, rng)},
                   [](const auto& in) { return probe(dropout(in[0], 0.4, true, DropoutKey{3, 1, 4, 1})); }});
  cases.push_back({"softmax_cross_entropy", {rand_t({n + 1, co + 1}, rng)}, [](const auto& in) {
                     std::vector<int> labels(in[0].dim(0));
                     for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % in[0].dim(1));
                     return softmax_cross_entropy(in[0], labels);
                   }});
  cases.push_back({"mse_loss", {rand_t(s, rng), rand_t(s, rng)}, [](const auto& in) { return mse_loss(in[0], in[1]); }});
  return cases;
}

// Routes the probe tensors into a clone's mask parameters.
LossFn cost_loss(const NasModel& model, RegKind kind) {
  return [&model, kind](const std::vector<Tensor>& in) {
    NasModel m = model.clone();
    std::size_t i = 0;
    for (std::size_t b = 0; b < m.spec().blocks.size(); ++b) {
      for (std::size_t l = 0; l < m.spec().blocks[b].layers.size(); ++l) {
        auto& ms = m.layer(b, l).masks;
        if (!ms) continue;
        ms->alpha = in[i++];
        ms->beta = in[i++];
        if (ms->gamma.defined()) ms->gamma = in[i++];
      }
    }
    const CostBreakdown c = compute_costs(m);
    return kind == RegKind::size ? c.r_size : c.r_ops;
  };
}

Outcome criterion_gradients() {
  Rng rng(2002);
  std::size_t cases = 0, failures = 0;
  double worst = 0.0;
  std::string worst_where;
  std::set<std::string> ops;
  const auto record = [&](const std::string& name, const testutil::GradCheckResult& r) {
    ++cases;
    ops.insert(name);
    if (r.worst > 1e-4) ++failures;
    if (r.worst > worst) {
      worst = r.worst;
      worst_where = name + " (" + r.where + ")";
    }
  };
  for (int trial = 0; trial < 10; ++trial) {
    for (auto& gc : op_cases(rng)) record(gc.name, testutil::check_gradients(gc.inputs, gc.loss));
  }
  // Straight-through estimator: backward passes the upstream gradient unchanged.
  for (int trial = 0; trial < 10; ++trial) {
    Tensor v = rand_t({12}, rng, true, -1.0, 2.0);
    Tape tape;
    {
      TapeScope scope(tape);
      tape.backward(probe(heaviside_ste(v)));
    }
    testutil::GradCheckResult r;
    for (std::size_t i = 0; i < 12; ++i) {
      r.worst = std::max(r.worst, std::fabs(v.grad()[i] - std::sin(0.7 * static_cast<double>(i) + 0.3)));
    }
    record("heaviside_ste", r);
  }
  // Mask transforms.
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t f = 2 + rng.below(30), c = 1 + rng.below(6), len = gamma_length(f);
    const auto draw = [&](std::size_t n) {
      Tensor t({n});
      for (double& v : t.data()) v = rng.uniform(0.1, 1.0) * (rng.uniform() < 0.5 ? -1 : 1);
      t.set_requires_grad(true);
      return t;
    };
    record("mask transforms", testutil::check_gradients({draw(c), draw(f), draw(len)}, [&](const auto& in) {
             MaskSet set = MaskSet::create(c, f);
             set.alpha = in[0];
             set.beta = in[1];
             set.gamma = in[2];
             const MaskOutputs out = compute_masks(set);
             Tensor w({f});
             for (std::size_t i = 0; i < f; ++i) w[i] = 1.0 + 0.1 * static_cast<double>(i);
             return add(sum(out.a_soft), add(sum(mul(out.b_soft, w)), sum(mul(out.g_soft, w))));
           }));
  }
  // r_size and r_ops with respect to alpha, beta, gamma.
  std::vector<NetworkSpec> specs{builtin_seed("ecg_tcn"), builtin_seed("synth_small")};
  for (int i = 0; i < 12; ++i) specs.push_back(random_spec(rng));
  for (const auto& spec : specs) {
    NasModel model = NasModel::build(spec, 5);
    std::vector<Tensor> inputs;
    for (auto& p : model.mask_params()) {
      for (double& v : p.tensor.data()) v = rng.uniform(0.55, 0.95) * (rng.uniform() < 0.2 ? -1 : 1);
      p.tensor.set_requires_grad(true);
      inputs.push_back(p.tensor);
    }
    if (inputs.empty()) continue;
    record("r_size", testutil::check_gradients(inputs, cost_loss(model, RegKind::size)));
    record("r_ops", testutil::check_gradients(inputs, cost_loss(model, RegKind::ops)));
  }
  const bool ok = failures == 0 && cases >= 200;
  return verdict(ok, std::to_string(cases) + " cases over " + std::to_string(ops.size()) + " functions, " +
                         std::to_string(failures) + " above 1e-4, worst " + fmt("%.2e", worst) +
                         (failures ? " at " + worst_where : std::string()));
}

// ---------------------------------------------------------------------------
// 3. Mask structure

Outcome criterion_mask_structure() {
  Rng rng(3003);
  std::size_t draws = 0, violations = 0;
  std::string first;
  for (int trial = 0; trial < 1500; ++trial) {
    const std::size_t f = 2 + rng.below(63);
    MaskSet set = MaskSet::create(1 + rng.below(4), f);
    for (double& v : set.alpha.data()) v = rng.uniform(-1.2, 1.2);
    for (double& v : set.beta.data()) v = rng.uniform(-0.6, 0.6);
    for (double& v : set.gamma.data()) v = rng.uniform(-0.6, 0.6);
    set.beta[0] = 1.0;
    set.gamma[0] = 1.0;
    const MaskOutputs out = compute_masks(set);
    bool ok = out.b_bin[0] == 1.0 && out.g_bin[0] == 1.0;
    for (std::size_t i = 1; i < f; ++i) ok = ok && out.b_bin[i] <= out.b_bin[i - 1] && out.b_soft[i] <= out.b_soft[i - 1];
    std::size_t zeros = 0;
    for (std::size_t m = 0; m < set.len_gamma; ++m) {
      double s = 0.0;
      for (std::size_t q = m; q < set.len_gamma; ++q) s += std::fabs(set.gamma[q]);
      zeros += s < 0.5;
    }
    const std::size_t step = std::size_t{1} << zeros;
    for (std::size_t i = 0; i < f; ++i) ok = ok && out.g_bin[i] == (i % step == 0 ? 1.0 : 0.0);
    ++draws;
    if (!ok) {
      ++violations;
      if (first.empty()) first = ", first at F=" + std::to_string(f);
    }
  }
  std::size_t keff_ok = 0;
  for (std::size_t f = 1; f <= 64; ++f) {
    MaskSet set = MaskSet::create(2, f);
    keff_ok += k_eff(set, compute_masks(set)).item() == static_cast<double>(f);
  }
  const bool ok = violations == 0 && keff_ok == 64;
  return verdict(ok, std::to_string(draws) + " draws with F in [2,64], " + std::to_string(violations) +
                         " structural violations" + first + "; K_eff = F at unit masks for " +
                         std::to_string(keff_ok) + "/64 seeds");
}

// ---------------------------------------------------------------------------
// 4. Extraction equivalence

Outcome criterion_extraction() {
  const std::size_t c_in = 2, c_seed = 4, f_seed = 8, t = 20;
  NetworkSpec spec;
  spec.input_channels = c_in;
  spec.input_length = t;
  spec.outputs = 2;
  spec.blocks = {{{conv_layer(c_seed, f_seed, 1, false, true, 0.0), head_layer(2)}, Residual::none}};
  NasModel model = NasModel::build(spec, 5);
  auto& p = model.layer(0, 0);
  for (std::size_t m = 0; m < c_seed; ++m) p.bias[m] = 0.1 * static_cast<double>(m + 1);
  Rng rng(4004);
  const Tensor x = random_input(spec, 3, rng);
  const std::vector<double> xs(x.data().begin(), x.data().end());
  const std::vector<double> w(p.weight.data().begin(), p.weight.data().end());
  const std::vector<double> bias(p.bias.data().begin(), p.bias.data().end());

  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> shapes;
  double layer_worst = 0.0;
  std::size_t layer_fail = 0;
  for (std::size_t subset = 1; subset < (1u << c_seed); ++subset) {
    std::vector<std::size_t> channels;
    for (std::size_t m = 0; m < c_seed; ++m) {
      const bool keep = (subset >> m) & 1;
      p.masks->alpha[m] = keep ? 1.0 : 0.0;
      if (keep) channels.push_back(m);
    }
    for (std::size_t fb = 1; fb <= f_seed; ++fb) {
      for (std::size_t zeros = 0; zeros < p.masks->len_gamma; ++zeros) {
        for (std::size_t q = 0; q < f_seed; ++q) p.masks->beta[q] = q < fb ? 1.0 : 0.0;
        for (std::size_t q = 0; q < p.masks->len_gamma; ++q) {
          p.masks->gamma[q] = q + zeros < p.masks->len_gamma ? 1.0 : 0.0;
        }
        const EffectiveArch arch = extract(model);
        const ArchLayer& L = arch.layers[0];
        shapes.insert({L.c_out, L.receptive_field, L.dilation});
        const oracle::PlainConv ref =
            oracle::shrunk_layer(w, bias, c_seed, c_in, f_seed, channels, L.receptive_field, L.dilation);
        std::vector<double> want =
            oracle::reference_conv(xs, 3, c_in, t, ref.weight, ref.c_out, ref.k, ref.bias, 1, ref.dilation);
        for (double& v : want) v = std::max(v, 0.0);
        ConcreteModel pruned = materialize(model, arch);
        std::vector<Tensor> masked_trace, pruned_trace;
        const Tensor a = model.forward(x, {}, &masked_trace);
        const Tensor b = pruned.forward(x, {}, &pruned_trace);
        double diff = 0.0;
        for (std::size_t i = 0; i < a.numel(); ++i) diff = std::max(diff, std::fabs(a[i] - b[i]));
        for (std::size_t n = 0; n < 3; ++n) {
          for (std::size_t m = 0, k = 0; m < c_seed; ++m) {
            const bool kept = k < channels.size() && channels[k] == m;
            for (std::size_t s = 0; s < t; ++s) {
              const double got = masked_trace[0][(n * c_seed + m) * t + s];
              const double expect = kept ? want[(n * channels.size() + k) * t + s] : 0.0;
              diff = std::max(diff, std::fabs(got - expect));
            }
            k += kept;
          }
        }
        layer_worst = std::max(layer_worst, diff);
        layer_fail += diff > 1e-5;
      }
    }
  }

  std::size_t samples = 0, net_fail = 0, count_fail = 0;
  double net_worst = 0.0;
  for (const char* name : {"ecg_tcn", "synth_small"}) {
    NasModel net = NasModel::build(builtin_seed(name), 9);
    randomize_batchnorm(net, rng);
    for (int trial = 0; trial < 60; ++trial) {
      randomize_masks(net, rng);
      const MaskTable masks = net.compute_mask_table();
      const EffectiveArch arch = extract(net, masks);
      ConcreteModel pruned = materialize(net, arch);
      const EquivalenceReport r = verify_equivalence(net, pruned, 3, 1e-5, samples);
      net_worst = std::max(net_worst, r.max_abs_diff);
      net_fail += !r.passed;
      count_fail += !(pruned.count() == integer_costs(net, masks) && count(arch) == integer_costs(net, masks));
      ++samples;
    }
  }
  for (int s = 0; s < 16; ++s) {
    const NetworkSpec spec_r = random_spec(rng);
    NasModel net = NasModel::build(spec_r, 40 + s);
    randomize_batchnorm(net, rng);
    for (int trial = 0; trial < 6; ++trial) {
      randomize_masks(net, rng);
      const MaskTable masks = net.compute_mask_table();
      const EffectiveArch arch = extract(net, masks);
      ConcreteModel pruned = materialize(net, arch);
      const EquivalenceReport r = verify_equivalence(net, pruned, 3, 1e-5, samples);
      net_worst = std::max(net_worst, r.max_abs_diff);
      net_fail += !r.passed;
      count_fail += !(pruned.count() == integer_costs(net, masks) && count(arch) == integer_costs(net, masks));
      ++samples;
    }
  }
  const bool ok = layer_fail == 0 && net_fail == 0 && count_fail == 0 && samples >= 200;
  return verdict(ok, "layer oracle: " + std::to_string(shapes.size()) + " distinct (C,F,d), max diff " +
                         fmt("%.1e", layer_worst) + "; network: " + std::to_string(samples) + " theta samples, " +
                         std::to_string(net_fail) + " failures, max diff " + fmt("%.1e", net_worst) + ", " +
                         std::to_string(count_fail) + " count mismatches");
}

// ---------------------------------------------------------------------------
// 5. Search-space accounting

NetworkSpec chain_spec(const std::vector<std::pair<std::size_t, std::size_t>>& layers) {
  NetworkSpec spec;
  spec.input_channels = 1;
  spec.input_length = 16;
  spec.outputs = 2;
  BlockSpec block;
  for (auto [c, f] : layers) block.layers.push_back(conv_layer(c, f, 1, false, true, 0.0));
  block.layers.push_back(head_layer(2));
  spec.blocks.push_back(block);
  return spec;
}

Outcome criterion_search_space() {
  const auto one = enumerate_search_space(chain_spec({{4, 4}}), 1000000);
  const auto two = enumerate_search_space(chain_spec({{4, 4}, {4, 2}}), 1000000);
  const auto twin = enumerate_search_space(chain_spec({{4, 4}, {4, 4}}), 1000000);
  const double r1 = one.formula / static_cast<double>(one.exact);
  const double r2 = two.formula / static_cast<double>(two.exact);
  const double r_twin = twin.formula / static_cast<double>(twin.exact);
  const double big = search_space_formula(std::vector<std::pair<std::size_t, std::size_t>>(8, {128, 17}));
  const bool oracle_ok = one.exact == oracle::layer_configurations_bruteforce(4, 4) &&
                         two.exact == oracle::layer_configurations_bruteforce(4, 4) *
                                          oracle::layer_configurations_bruteforce(4, 2);
  const bool ok = oracle_ok && r1 <= 2.0 && r1 >= 0.5 && r2 <= 2.0 && r2 >= 0.5 && std::fabs(std::log10(big) - 32.0) < 0.5;
  std::ostringstream os;
  os << "1 layer (4,4): exact " << one.exact << " formula " << one.formula << " ratio " << fmt("%.2f", r1)
     << "; 2 layers (4,4)+(4,2): exact " << two.exact << " formula " << two.formula << " ratio " << fmt("%.2f", r2)
     << " [(4,4)+(4,4): exact " << twin.exact << " formula " << twin.formula << " ratio " << fmt("%.2f", r_twin)
     << "]; 8 x (C=128, F=17): " << fmt("%.3g", big);
  return verdict(ok, os.str());
}

// ---------------------------------------------------------------------------
// 6 + 9. Synthetic dilation discovery and determinism

constexpr std::size_t kSynthSamples = 3000;

DataConfig synth_data(std::uint64_t seed) {
  DataConfig d;
  d.format = "synthetic";
  d.samples = kSynthSamples;
  d.length = 32;
  d.lags = {0, 4, 8};
  d.noise = 0.1;
  d.data_seed = seed;
  d.split_seed = seed;
  d.val_fraction = 0.2;
  return d;
}

SearchConfig synth_config(std::uint64_t seed) {
  SearchConfig cfg;
  cfg.batch_size = 64;
  cfg.search_patience = 10;
  cfg.search_max_epochs = 60;
  cfg.warmup = PhaseSchedule::converge(5, 40);
  cfg.finetune = PhaseSchedule::converge(5, 30);
  cfg.rng_seed = seed;
  return cfg;
}

bool has_dilation(const EffectiveArch& arch) {
  for (const auto& l : arch.layers) {
    if (l.searchable && l.kind == LayerKind::conv1d && l.c_out > 0 && l.dilation >= 2) return true;
  }
  return false;
}

struct BestRun {
  bool found = false;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  EffectiveArch arch;
  double metric = 0.0;
  double val_metric = 0.0;
};
BestRun g_best_run;

Outcome criterion_synthetic() {
  const NetworkSpec spec = builtin_seed("synth_small");
  const std::uint64_t seed_weights = count(extract(NasModel::build(spec, 0))).weights;
  const auto lambdas = log_space(1e-5, 1e-2, 6);
  std::size_t seeds_ok = 0;
  std::ostringstream detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto t0 = std::chrono::steady_clock::now();
    const DataSplits data = load_splits(synth_data(seed), spec);
    const SearchConfig cfg = synth_config(seed);
    NasModel warm = NasModel::build(spec, seed);
    warmup(warm, data.train, data.val, cfg);
    const double seed_acc = evaluate(warm, data.val, cfg.batch_size).metric;
    const auto points = sweep(warm, data, lambdas, cfg);
    const ParetoPoint* best = nullptr;
    for (const auto& p : points) {
      if (p.failed()) continue;
      const bool qualifies = has_dilation(p.arch) && 4 * p.params <= seed_weights && p.val_metric >= seed_acc - 2.0;
      if (qualifies && (!best || p.val_metric > best->val_metric)) best = &p;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail << (seed > 1 ? "; " : "") << "seed " << seed << ": warmup acc " << fmt("%.1f", seed_acc);
    if (best) {
      ++seeds_ok;
      detail << ", lambda " << fmt("%.3g", best->lambda) << " -> " << best->params << " weights, acc "
             << fmt("%.1f", best->val_metric) << ", max d ";
      std::size_t max_d = 1;
      for (const auto& l : best->arch.layers) max_d = std::max(max_d, l.dilation);
      detail << max_d;
      if (!g_best_run.found || best->val_metric > g_best_run.val_metric) {
        g_best_run = {true, seed, best->lambda, best->arch, best->metric_value, best->val_metric};
      }
    } else {
      detail << ", no qualifying point";
    }
    detail << " (" << fmt("%.0f", secs) << " s)";
  }
  return verdict(seeds_ok >= 2, std::to_string(seeds_ok) + "/3 seeds; " + detail.str());
}

Outcome criterion_determinism() {
  if (!g_best_run.found) return {Status::fail, "criterion 6 produced no qualifying run to repeat"};
  const NetworkSpec spec = builtin_seed("synth_small");
  const DataSplits data = load_splits(synth_data(g_best_run.seed), spec);
  SearchConfig cfg = synth_config(g_best_run.seed);
  NasModel warm = NasModel::build(spec, g_best_run.seed);
  warmup(warm, data.train, data.val, cfg);
  cfg.lambda = g_best_run.lambda;
  const RunOutcome again = run_point(warm, data, cfg);
  const bool same_arch = again.point.arch == g_best_run.arch;
  const std::string a = fmt("%.6f", g_best_run.metric), b = fmt("%.6f", again.point.metric_value);
  return verdict(same_arch && a == b, std::string("seed ") + std::to_string(g_best_run.seed) + ", lambda " +
                                          fmt("%.3g", g_best_run.lambda) + ": arch " +
                                          (same_arch ? "identical" : "differs") + ", metric " + a + " vs " + b);
}

// ---------------------------------------------------------------------------
// 7. ECG5000 scaled reproduction

std::string find_split(const std::filesystem::path& dir, const std::string& split) {
  for (const char* ext : {".tsv", ".txt", ".csv"}) {
    const auto p = dir / ("ECG5000_" + split + ext);
    if (std::filesystem::exists(p)) return p.string();
  }
  return {};
}

Outcome criterion_ecg(const std::string& dir) {
  if (dir.empty()) return {Status::skip, "PIT_ECG5000_DIR not set; ECG5000 files are not bundled"};
  const std::string train = find_split(dir, "TRAIN"), test = find_split(dir, "TEST");
  if (train.empty() || test.empty()) return {Status::skip, "ECG5000_TRAIN/ECG5000_TEST not found in " + dir};
  const NetworkSpec spec = builtin_seed("ecg_tcn");
  DataConfig d;
  d.format = "ucr";
  d.train_path = train;
  d.test_path = test;
  const DataSplits data = load_splits(d, spec);
  SearchConfig cfg;
  cfg.batch_size = 32;
  cfg.search_patience = 20;
  cfg.warmup = PhaseSchedule::converge(20, 300);
  cfg.finetune = PhaseSchedule::converge(20, 300);
  NasModel warm = NasModel::build(spec, 0);
  warmup(warm, data.train, data.val, cfg);
  const auto points = sweep(warm, data, log_space(5e-7, 7.5e-3, 8), cfg);
  const auto front = pareto_filter(points);
  std::uint64_t lo = UINT64_MAX, hi = 0;
  double best_acc = 0.0;
  for (std::size_t i : front) {
    lo = std::min(lo, points[i].params);
    hi = std::max(hi, points[i].params);
    best_acc = std::max(best_acc, points[i].metric_value);
  }
  const bool ok = front.size() >= 3 && hi >= 4 * lo && best_acc >= 92.0 && lo <= 6000;
  return verdict(ok, std::to_string(front.size()) + " front points, weights " + std::to_string(lo) + " to " +
                         std::to_string(hi) + ", best test accuracy " + fmt("%.2f", best_acc));
}

// ---------------------------------------------------------------------------
// 8. Degenerate corners

Dataset random_labels(const NetworkSpec& spec, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.num_classes = spec.outputs;
  for (std::size_t k = 0; k < spec.outputs; ++k) d.class_names.push_back(std::to_string(k));
  d.inputs = random_input(spec, n, rng);
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(i % spec.outputs));
  return d;
}

Outcome criterion_degenerate() {
  constexpr double kLargestSweepLambda = 7.5e-3;
  std::ostringstream detail;
  bool ok = true;
  {
    const NetworkSpec spec = builtin_seed("synth_small");
    const DataSplits data = load_splits(synth_data(1), spec);
    SearchConfig cfg = synth_config(1);
    NasModel warm = NasModel::build(spec, 1);
    warmup(warm, data.train, data.val, cfg);
    const EffectiveArch seed_arch = extract(warm);
    NasModel zero = warm.clone();
    cfg.lambda = 0.0;
    const History hz = search(zero, data.train, data.val, cfg);
    const bool unchanged = extract(zero) == seed_arch;
    NasModel big = warm.clone();
    cfg.lambda = 1e4 * kLargestSweepLambda;
    cfg.search_max_epochs = 2;
    const History hb = search(big, data.train, data.val, cfg);
    const bool flagged = std::count(hb.flags.begin(), hb.flags.end(), "degenerate: cost-only") == 1;
    ok = ok && unchanged && flagged;
    detail << "synth_small: lambda 0 over " << hz.epochs.size() << " epochs " << (unchanged ? "keeps" : "changes")
           << " the seed; lambda 75 " << (flagged ? "flagged cost-only" : "not flagged") << " (lambda*R/task "
           << fmt("%.3g", hb.initial_weighted / hb.initial_task) << ")";
  }
  {
    const NetworkSpec spec = builtin_seed("ecg_tcn");
    const Dataset train = random_labels(spec, 160, 1), val = random_labels(spec, 40, 2);
    SearchConfig cfg;
    cfg.batch_size = 32;
    cfg.rng_seed = 8;
    NasModel model = NasModel::build(spec, 8);
    const EffectiveArch seed_arch = extract(model);
    cfg.lambda = 0.0;
    const History hz = search(model, train, val, cfg);
    const bool unchanged = extract(model) == seed_arch;
    NasModel big = NasModel::build(spec, 8);
    cfg.lambda = 1e4 * kLargestSweepLambda;
    cfg.search_max_epochs = 1;
    const History hb = search(big, train, val, cfg);
    const bool flagged = std::count(hb.flags.begin(), hb.flags.end(), "degenerate: cost-only") == 1;
    ok = ok && unchanged && flagged;
    detail << "; ecg_tcn: lambda 0 over " << hz.epochs.size() << " epochs " << (unchanged ? "keeps" : "changes")
           << " the seed; lambda 75 " << (flagged ? "flagged cost-only" : "not flagged");
  }
  return verdict(ok, detail.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string ecg_dir;
  if (const char* env = std::getenv("PIT_ECG5000_DIR")) ecg_dir = env;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--ecg-dir", ecg_dir, "Directory with ECG5000_TRAIN and ECG5000_TEST");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<int, std::pair<std::string, std::function<Outcome()>>>> criteria{
      {1, {"init identity", criterion_init_identity}},
      {2, {"gradient suite", criterion_gradients}},
      {3, {"mask structure", criterion_mask_structure}},
      {4, {"extraction equivalence", criterion_extraction}},
      {5, {"search-space accounting", criterion_search_space}},
      {6, {"synthetic dilation discovery", criterion_synthetic}},
      {7, {"ECG5000 scaled reproduction", [&] { return criterion_ecg(ecg_dir); }}},
      {8, {"degenerate corners", criterion_degenerate}},
      {9, {"determinism", criterion_determinism}},
  };
  std::size_t run = 0, failed = 0, skipped = 0;
  for (const auto& [id, entry] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    if (id == 9 && !g_best_run.found && std::find(only.begin(), only.end(), 6) == only.end() && !only.empty()) {
      criterion_synthetic();
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.status == Status::pass ? "PASS" : (o.status == Status::fail ? "FAIL" : "SKIP");
    std::printf("[%s] criterion %d (%s): %s [%.1f s]\n", tag, id, entry.first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
    ++run;
    failed += o.status == Status::fail;
    skipped += o.status == Status::skip;
  }
  if (failed > 0) return 1;
  if (run > 0 && skipped == run) return 77;
  return 0;
}
