#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pit/data.hpp"
#include "pit/ini.hpp"
#include "pit/network.hpp"
#include "pit/search.hpp"

namespace pit {

struct DataConfig {
  std::string format = "synthetic";  // synthetic, ucr or pitd
  std::string train_path;
  std::string test_path;
  std::string delimiter = "auto";  // auto, comma, tab or space
  double val_fraction = 0.2;
  double test_fraction = 0.0;  // only used without a test file
  bool normalize = true;
  std::uint64_t split_seed = 0;
  // synthetic task
  std::size_t samples = 3000;
  std::size_t length = 32;
  std::vector<std::size_t> lags{0, 4, 8};
  double noise = 0.1;
  std::uint64_t data_seed = 0;
};

/// Sections [network] (plus [block.*]), [data], [train] and [nas]. Unknown
/// sections and keys are rejected.
struct RunConfig {
  NetworkSpec network;
  DataConfig data;
  SearchConfig search;
  std::vector<double> lambdas;  // lambda or lambda_list; empty selects the default
};

RunConfig parse_run_config(const IniDocument& doc);
RunConfig load_run_config(const std::string& path);
/// Every setting with defaults filled in, in the same file format.
std::string resolved_config(const RunConfig& cfg);

/// "epochs:N" or "converge:P" or "converge:P:MAX".
PhaseSchedule parse_schedule(const std::string& s);
std::string to_string(const PhaseSchedule& s);

/// 1 / (weights of the seed network).
double default_lambda(const NetworkSpec& spec);

/// Loads, splits and normalizes (train statistics only) the configured data
/// and checks it against the network input and output sizes.
DataSplits load_splits(const DataConfig& cfg, const NetworkSpec& network);

/// A checkpoint directory holds model.pitd and network.cfg.
void save_checkpoint(const std::string& dir, const NasModel& model);
NasModel load_checkpoint(const std::string& dir);

}  // namespace pit
