#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pit/arch.hpp"
#include "pit/cost.hpp"
#include "pit/data.hpp"
#include "pit/model.hpp"

namespace pit {

/// Length of a weight-only phase: a fixed number of epochs, or training until
/// the validation loss has not improved for `patience` epochs (bounded by
/// `max_epochs`).
struct PhaseSchedule {
  bool to_convergence = true;
  std::size_t epochs = 0;
  std::size_t patience = 10;
  std::size_t max_epochs = 200;

  static PhaseSchedule fixed(std::size_t n) { return {false, n, 1, n}; }
  static PhaseSchedule converge(std::size_t patience, std::size_t max_epochs = 200) {
    return {true, 0, patience, max_epochs};
  }
};

enum class FinetuneMode { finetune, retrain };
FinetuneMode parse_finetune_mode(const std::string& s);
std::string to_string(FinetuneMode m);

struct SearchConfig {
  double lambda = 0.0;
  RegKind reg_kind = RegKind::size;
  std::size_t batch_size = 128;
  double lr_weights = 1e-3;
  double lr_masks = 1e-3;
  PhaseSchedule warmup = PhaseSchedule::converge(10);
  std::size_t search_patience = 20;
  std::size_t search_max_epochs = 200;
  PhaseSchedule finetune = PhaseSchedule::converge(10);
  FinetuneMode finetune_mode = FinetuneMode::finetune;
  std::uint64_t rng_seed = 0;

  /// Throws ConfigError on a negative lambda, zero batch size, non-positive
  /// learning rate or zero patience.
  void validate() const;
};

struct EpochRecord {
  std::string phase;  // warmup, search, finetune
  std::size_t epoch = 0;
  double train_task = 0.0;      // mean task loss over the epoch's batches
  double train_weighted = 0.0;  // lambda * R at the end of the epoch
  double val_loss = 0.0;        // the monitored quantity
  double val_metric = 0.0;
  std::uint64_t params = 0;  // integer weights at the binarized masks
  std::uint64_t macs = 0;
  bool improved = false;
};

struct History {
  std::vector<EpochRecord> epochs;
  std::vector<std::string> flags;
  std::size_t best_epoch = 0;  // index within the phase, 0 when no epoch ran
  double initial_task = 0.0;       // validation task loss before the phase
  double initial_weighted = 0.0;   // lambda * R before the phase
};

struct Evaluation {
  double loss = 0.0;
  double metric = 0.0;  // accuracy in percent, or mean absolute error
  std::string metric_name;
};

/// "accuracy" for classification, "mae" for regression.
std::string metric_name(const Dataset& data);
bool metric_maximized(const std::string& name);

/// Eval-mode task loss and metric over a dataset.
Evaluation evaluate(NasModel& model, const Dataset& data, std::size_t batch_size = 256);

/// Weight-only training on the task loss with the masks frozen at their
/// current values. Rounds the result to single precision.
History warmup(NasModel& model, const Dataset& train, const Dataset& val, const SearchConfig& cfg);

/// Joint training of weights and masks on task loss + lambda * R, each step
/// on one batch. Stops once the validation loss (task + lambda * R) has not
/// improved for `search_patience` epochs and restores the best epoch.
History search(NasModel& model, const Dataset& train, const Dataset& val, const SearchConfig& cfg);

struct FinetuneResult {
  History history;
  Evaluation val;
  std::optional<Evaluation> test;
};

/// Weight-only training with the searched masks frozen; in retrain mode the
/// weights are drawn afresh first.
FinetuneResult finetune(NasModel& model, const Dataset& train, const Dataset& val, const Dataset* test,
                        const SearchConfig& cfg);

struct ParetoPoint {
  double lambda = 0.0;
  RegKind reg_kind = RegKind::size;
  std::uint64_t rng_seed = 0;
  std::string metric_name;
  double metric_value = 0.0;
  double val_metric = 0.0;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  EffectiveArch arch;
  std::string checkpoint_path;
  std::vector<std::string> flags;
  std::string error;  // non-empty when the run failed

  bool failed() const { return !error.empty(); }
};

struct RunOutcome {
  ParetoPoint point;
  NasModel model;
  History search_history;
  FinetuneResult finetune;
};

/// Search then fine-tune from a copy of the warm model.
RunOutcome run_point(const NasModel& warm, const DataSplits& data, const SearchConfig& cfg);

/// One run per distinct (lambda, reg_kind, rng_seed), in first-seen order.
/// A failing run is recorded with its error and the sweep continues.
/// `on_point` is called after every run (for checkpointing).
std::vector<ParetoPoint> sweep(const NasModel& warm, const DataSplits& data, const std::vector<double>& lambdas,
                               const SearchConfig& base,
                               const std::function<void(const RunOutcome&)>& on_point = {});

/// Duplicate-free lambdas in first-seen order.
std::vector<double> dedup_lambdas(const std::vector<double>& lambdas);

/// n values spaced evenly in log scale from lo to hi inclusive.
std::vector<double> log_space(double lo, double hi, std::size_t n);

enum class CostAxis { params, macs };

/// Indices of the non-dominated points (failed points excluded). A point
/// dominates another when its metric is at least as good and its cost at
/// most as high, one of the two strictly; of exact ties the first is kept.
/// Throws std::invalid_argument when metric names differ.
std::vector<std::size_t> pareto_filter(const std::vector<ParetoPoint>& points, CostAxis axis = CostAxis::params);

}  // namespace pit
