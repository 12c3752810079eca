#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pit/container.hpp"
#include "pit/tensor.hpp"

namespace pit {

/// Samples of a classification or regression task.
struct Dataset {
  Tensor inputs;                         // [N, C, T]
  std::vector<int> labels;               // classification targets
  Tensor targets;                        // regression targets [N, O]
  std::size_t num_classes = 0;           // 0 for regression
  std::vector<std::string> class_names;  // original label of each class index

  std::size_t size() const { return inputs.defined() ? inputs.dim(0) : 0; }
  std::size_t channels() const { return inputs.dim(1); }
  std::size_t length() const { return inputs.dim(2); }
  bool is_classification() const { return num_classes > 0; }
};

/// Samples `indices` of `data`, in the given order.
Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices);

/// Inputs of the given samples as one [B, C, T] batch.
Tensor gather_inputs(const Dataset& data, const std::vector<std::size_t>& indices);

/// Reads a UCR-style delimited file: every row is a label followed by T
/// values of one channel. The delimiter is detected from the first line
/// (comma, tab, otherwise whitespace) unless given. Labels are mapped to
/// 0-based class indices in ascending numeric order; when `classes` is given
/// (the training file's class names) the same mapping is used and unknown
/// labels are rejected.
Dataset load_ucr_csv(const std::string& path, std::optional<char> delimiter = std::nullopt,
                     const std::vector<std::string>* classes = nullptr);
Dataset parse_ucr_text(const std::string& text, const std::string& origin, std::optional<char> delimiter = std::nullopt,
                       const std::vector<std::string>* classes = nullptr);

struct NormStats {
  std::vector<double> mean;  // per channel
  std::vector<double> std;
};

/// Per-channel mean and standard deviation over all samples and steps.
NormStats fit_normalization(const Dataset& train);
/// (x - mean) / std per channel; channels with zero spread are only centered.
void apply_normalization(Dataset& data, const NormStats& stats);

/// Cuts every series into floor((T - length) / shift) + 1 windows; targets
/// are inherited.
Dataset window(const Dataset& data, std::size_t length, std::size_t shift);

/// Binary task on white-noise inputs ([n, 1, t]): the label is 1 when
/// sum over lags of x[t - 1 - lag], plus noise_std * N(0, 1), is positive.
Dataset synth_dilated_task(std::size_t n, std::size_t t, const std::vector<std::size_t>& lags, double noise_std,
                           std::uint64_t rng_seed);

struct SplitFractions {
  double train = 0.8;
  double val = 0.2;
  double test = 0.0;
};

struct DataSplits {
  Dataset train, val, test;
};

/// Deterministic partition. With `stratified` every class is divided
/// separately and must have at least one sample per non-empty split.
DataSplits split(const Dataset& data, const SplitFractions& fractions, bool stratified, std::uint64_t rng_seed);

/// Dataset stored in a PITD container under the names "inputs", "labels"
/// (class indices) or "targets".
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

}  // namespace pit
