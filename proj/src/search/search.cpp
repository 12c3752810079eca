#include "pit/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pit/ini.hpp"
#include "pit/ops.hpp"
#include "pit/rng.hpp"

namespace pit {

FinetuneMode parse_finetune_mode(const std::string& s) {
  if (s == "finetune") return FinetuneMode::finetune;
  if (s == "retrain") return FinetuneMode::retrain;
  throw ConfigError("finetune_mode must be finetune or retrain, got '" + s + "'");
}

std::string to_string(FinetuneMode m) { return m == FinetuneMode::finetune ? "finetune" : "retrain"; }

void SearchConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be a non-negative number");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(lr_weights > 0.0) || !(lr_masks > 0.0)) throw ConfigError("learning rates must be positive");
  if (search_patience == 0 || warmup.patience == 0 || finetune.patience == 0) {
    throw ConfigError("patience must be at least 1");
  }
}

std::string metric_name(const Dataset& data) { return data.is_classification() ? "accuracy" : "mae"; }

bool metric_maximized(const std::string& name) { return name == "accuracy"; }

namespace {

enum PhaseId : std::uint64_t { kWarmup = 1, kSearch = 2, kFinetune = 3, kRetrainInit = 4 };

struct Batch {
  Tensor x;
  std::vector<int> labels;
  Tensor targets;
};

Batch make_batch(const Dataset& data, const std::vector<std::size_t>& idx) {
  Batch b;
  b.x = gather_inputs(data, idx);
  if (data.is_classification()) {
    for (std::size_t i : idx) b.labels.push_back(data.labels[i]);
  } else {
    b.targets = subset(data, idx).targets;
  }
  return b;
}

Tensor task_loss(const Tensor& out, const Batch& b) {
  if (!b.labels.empty()) return softmax_cross_entropy(out, b.labels);
  return mse_loss(out, b.targets);
}

std::vector<std::vector<std::size_t>> batches_for_epoch(std::size_t n, std::size_t batch_size, std::uint64_t seed) {
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch_size) {
    out.emplace_back(perm.begin() + static_cast<long>(s), perm.begin() + static_cast<long>(std::min(n, s + batch_size)));
  }
  return out;
}

using Snapshot = std::vector<std::pair<std::string, Tensor>>;

Snapshot snapshot(const NasModel& model) {
  Snapshot s = model.named_tensors();
  for (auto& [name, t] : s) t = t.clone();
  return s;
}

double regularizer_value(const NasModel& model, RegKind kind) {
  const CostBreakdown c = compute_costs(model);
  return (kind == RegKind::size ? c.r_size : c.r_ops).item();
}

void require_data(const Dataset& train, const Dataset& val) {
  if (train.size() == 0) throw DataError("training split is empty");
  if (val.size() == 0) throw DataError("validation split is empty");
}

struct PhaseSetup {
  PhaseId id;
  std::string name;
  bool train_masks = false;
  std::size_t max_epochs = 0;
  std::size_t patience = 1;
  bool early_stop = true;
};

// Shared epoch loop: trains, evaluates, tracks the best epoch and restores it.
History run_phase(NasModel& model, const Dataset& train, const Dataset& val, const SearchConfig& cfg,
                  const PhaseSetup& setup) {
  History h;
  const bool with_reg = setup.train_masks;
  model.set_weights_trainable(true);
  model.set_masks_trainable(setup.train_masks);
  Adam weights(model.weight_params(), AdamOptions{cfg.lr_weights});
  std::optional<Adam> masks;
  if (setup.train_masks) masks.emplace(model.mask_params(), AdamOptions{cfg.lr_masks});

  const auto monitored = [&](const Evaluation& e) {
    return with_reg ? e.loss + cfg.lambda * regularizer_value(model, cfg.reg_kind) : e.loss;
  };
  const Evaluation init = evaluate(model, val, cfg.batch_size);
  h.initial_task = init.loss;
  h.initial_weighted = with_reg ? cfg.lambda * regularizer_value(model, cfg.reg_kind) : 0.0;
  double best = monitored(init);
  Snapshot best_state;
  const std::uint64_t phase_seed = derive_seed(cfg.rng_seed, setup.id);

  for (std::size_t epoch = 1; epoch <= setup.max_epochs; ++epoch) {
    const auto batches = batches_for_epoch(train.size(), cfg.batch_size, derive_seed(phase_seed, epoch));
    double task_sum = 0.0;
    MaskTable frozen_table;
    if (!setup.train_masks) frozen_table = model.compute_mask_table();
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const Batch batch = make_batch(train, batches[bi]);
      Tape tape;
      TapeScope scope(tape);
      const MaskTable table = setup.train_masks ? model.compute_mask_table() : frozen_table;
      ForwardOptions opts;
      opts.train = true;
      opts.dropout = DropoutKey{phase_seed, epoch, bi, 0};
      const Tensor out = model.forward(batch.x, opts, table);
      const Tensor task = task_loss(out, batch);
      task_sum += task.item();
      if (with_reg) {
        const LossTerms terms = total_loss(task, compute_costs(model, table), cfg.lambda, cfg.reg_kind);
        tape.backward(terms.total);
      } else {
        tape.backward(task);
      }
      weights.step();
      weights.zero_grad();
      if (masks) {
        masks->step();
        masks->zero_grad();
      }
    }
    EpochRecord rec;
    rec.phase = setup.name;
    rec.epoch = epoch;
    rec.train_task = task_sum / static_cast<double>(batches.size());
    rec.train_weighted = with_reg ? cfg.lambda * regularizer_value(model, cfg.reg_kind) : 0.0;
    const Evaluation e = evaluate(model, val, cfg.batch_size);
    rec.val_loss = monitored(e);
    rec.val_metric = e.metric;
    const IntegerCosts ic = integer_costs(model, model.compute_mask_table());
    rec.params = ic.weights;
    rec.macs = ic.macs;
    if (rec.val_loss < best) {
      best = rec.val_loss;
      h.best_epoch = epoch;
      rec.improved = true;
      if (setup.early_stop) best_state = snapshot(model);
    }
    h.epochs.push_back(rec);
    if (setup.early_stop && epoch - h.best_epoch >= setup.patience) break;
  }
  if (setup.early_stop && !best_state.empty()) model.load_named(best_state);
  if (!setup.early_stop) h.best_epoch = h.epochs.size();
  model.set_masks_trainable(false);
  if (!h.epochs.empty()) model.round_to_float();
  return h;
}

PhaseSetup weight_phase(PhaseId id, std::string name, const PhaseSchedule& s) {
  PhaseSetup p{id, std::move(name)};
  p.early_stop = s.to_convergence;
  p.max_epochs = s.to_convergence ? s.max_epochs : s.epochs;
  p.patience = s.patience;
  return p;
}

}  // namespace

Evaluation evaluate(NasModel& model, const Dataset& data, std::size_t batch_size) {
  Evaluation e;
  e.metric_name = metric_name(data);
  if (data.size() == 0) throw DataError("cannot evaluate on an empty dataset");
  const MaskTable table = model.compute_mask_table();
  double loss_sum = 0.0, metric_sum = 0.0;
  for (std::size_t s = 0; s < data.size(); s += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, data.size() - s));
    std::iota(idx.begin(), idx.end(), s);
    const Batch batch = make_batch(data, idx);
    const Tensor out = model.forward(batch.x, ForwardOptions{}, table);
    loss_sum += task_loss(out, batch).item() * static_cast<double>(idx.size());
    const std::size_t k = out.dim(1);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (data.is_classification()) {
        const auto row = out.data().subspan(i * k, k);
        const auto pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        metric_sum += pred == batch.labels[i] ? 1.0 : 0.0;
      } else {
        double err = 0.0;
        for (std::size_t j = 0; j < k; ++j) err += std::fabs(out[i * k + j] - batch.targets[i * k + j]);
        metric_sum += err / static_cast<double>(k);
      }
    }
  }
  const double n = static_cast<double>(data.size());
  e.loss = loss_sum / n;
  e.metric = metric_sum / n * (data.is_classification() ? 100.0 : 1.0);
  return e;
}

History warmup(NasModel& model, const Dataset& train, const Dataset& val, const SearchConfig& cfg) {
  cfg.validate();
  require_data(train, val);
  return run_phase(model, train, val, cfg, weight_phase(kWarmup, "warmup", cfg.warmup));
}

History search(NasModel& model, const Dataset& train, const Dataset& val, const SearchConfig& cfg) {
  cfg.validate();
  require_data(train, val);
  PhaseSetup setup{kSearch, "search", true, cfg.search_max_epochs, cfg.search_patience, true};
  History h = run_phase(model, train, val, cfg, setup);
  if (h.initial_weighted > 100.0 * h.initial_task) {
    h.flags.push_back("degenerate: cost-only");
  } else if (h.initial_weighted < 0.01 * h.initial_task) {
    h.flags.push_back("degenerate: accuracy-only");
  }
  return h;
}

FinetuneResult finetune(NasModel& model, const Dataset& train, const Dataset& val, const Dataset* test,
                        const SearchConfig& cfg) {
  cfg.validate();
  require_data(train, val);
  if (cfg.finetune_mode == FinetuneMode::retrain) {
    model.reinitialize_weights(derive_seed(cfg.rng_seed, kRetrainInit));
  }
  FinetuneResult r;
  r.history = run_phase(model, train, val, cfg, weight_phase(kFinetune, "finetune", cfg.finetune));
  r.val = evaluate(model, val, cfg.batch_size);
  if (test && test->size() > 0) r.test = evaluate(model, *test, cfg.batch_size);
  return r;
}

RunOutcome run_point(const NasModel& warm, const DataSplits& data, const SearchConfig& cfg) {
  RunOutcome out{ParetoPoint{}, warm.clone(), History{}, FinetuneResult{}};
  out.search_history = search(out.model, data.train, data.val, cfg);
  out.finetune = finetune(out.model, data.train, data.val, &data.test, cfg);
  ParetoPoint& p = out.point;
  p.lambda = cfg.lambda;
  p.reg_kind = cfg.reg_kind;
  p.rng_seed = cfg.rng_seed;
  p.arch = extract(out.model);
  p.params = p.arch.params_weights_only;
  p.macs = p.arch.macs;
  const Evaluation& final_eval = out.finetune.test ? *out.finetune.test : out.finetune.val;
  p.metric_name = final_eval.metric_name;
  p.metric_value = final_eval.metric;
  p.val_metric = out.finetune.val.metric;
  p.flags = out.search_history.flags;
  return out;
}

std::vector<double> dedup_lambdas(const std::vector<double>& lambdas) {
  std::vector<double> out;
  for (double l : lambdas) {
    if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
  }
  return out;
}

std::vector<double> log_space(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (!(lo > 0.0) || !(hi > 0.0)) throw std::invalid_argument("log_space needs positive bounds");
  if (n == 1) return {lo};
  std::vector<double> out;
  const double step = std::log(hi / lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out.push_back(i + 1 == n ? hi : lo * std::exp(step * static_cast<double>(i)));
  return out;
}

std::vector<ParetoPoint> sweep(const NasModel& warm, const DataSplits& data, const std::vector<double>& lambdas,
                               const SearchConfig& base, const std::function<void(const RunOutcome&)>& on_point) {
  std::vector<ParetoPoint> points;
  for (double lambda : dedup_lambdas(lambdas)) {
    SearchConfig cfg = base;
    cfg.lambda = lambda;
    try {
      RunOutcome r = run_point(warm, data, cfg);
      if (on_point) on_point(r);
      points.push_back(std::move(r.point));
    } catch (const std::exception& e) {
      ParetoPoint p;
      p.lambda = lambda;
      p.reg_kind = cfg.reg_kind;
      p.rng_seed = cfg.rng_seed;
      p.metric_name = metric_name(data.train);
      p.error = e.what();
      points.push_back(std::move(p));
    }
  }
  return points;
}

std::vector<std::size_t> pareto_filter(const std::vector<ParetoPoint>& points, CostAxis axis) {
  std::vector<std::size_t> order;
  std::string name;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].failed()) continue;
    if (name.empty()) name = points[i].metric_name;
    if (points[i].metric_name != name) {
      throw std::invalid_argument("cannot compare metrics '" + name + "' and '" + points[i].metric_name + "'");
    }
    order.push_back(i);
  }
  const bool maximize = metric_maximized(name);
  const auto cost = [&](std::size_t i) {
    return static_cast<double>(axis == CostAxis::params ? points[i].params : points[i].macs);
  };
  const auto better = [&](double a, double b) { return maximize ? a > b : a < b; };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cost(a) != cost(b)) return cost(a) < cost(b);
    return better(points[a].metric_value, points[b].metric_value);
  });
  std::vector<std::size_t> front;
  std::optional<double> best;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (k > 0 && cost(order[k - 1]) == cost(i)) continue;
    if (!best || better(points[i].metric_value, *best)) {
      front.push_back(i);
      best = points[i].metric_value;
    }
  }
  std::sort(front.begin(), front.end());
  return front;
}

}  // namespace pit
