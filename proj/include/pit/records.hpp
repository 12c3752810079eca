#pragma once

#include <string>

#include "pit/search.hpp"

namespace pit {

/// One JSON object per line. Epoch records carry phase, epoch, train_task,
/// lambda_r, val_loss, val_metric, params, macs and improved; every phase
/// starts with an epoch-0 record holding the initial validation task loss and
/// lambda * R.
std::string history_to_jsonl(const History& history, const std::string& phase);

/// Point record: lambda, reg, rng_seed, metric, value, val_metric, params,
/// params_with_bias, macs, checkpoint, flags, error, front and a compact
/// per-layer arch summary.
std::string point_to_json(const ParetoPoint& point, bool on_front);

/// Reads a point record. The arch field only carries the totals; the full
/// architecture lives next to the checkpoint.
ParetoPoint point_from_json(const std::string& line);

}  // namespace pit
