#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pit/ini.hpp"

namespace pit {

enum class LayerKind { conv1d, fc, avgpool };
enum class Activation { none, relu };
enum class Residual { none, identity, pointwise };
enum class TaskKind { classification, regression };

struct LayerSpec {
  LayerKind kind = LayerKind::conv1d;
  std::size_t c_out = 1;   // conv / fc
  std::size_t f_seed = 1;  // conv receptive field; pooling window for avgpool
  std::size_t stride = 1;
  bool batchnorm = false;
  Activation activation = Activation::none;
  double dropout = 0.0;
  bool searchable = true;
};

struct BlockSpec {
  std::vector<LayerSpec> layers;
  Residual residual = Residual::none;
};

/// Declarative seed network. The last layer of the last block is the task
/// head: a non-searchable fc layer with `outputs` units.
struct NetworkSpec {
  std::size_t input_channels = 1;
  std::size_t input_length = 1;
  std::vector<BlockSpec> blocks;
  TaskKind task = TaskKind::classification;
  std::size_t outputs = 2;
};

/// Runtime shape of one layer. For fc layers the weight sees c_in * t_in
/// features and t_out is 1.
struct LayerShape {
  std::size_t c_in = 0;
  std::size_t t_in = 0;
  std::size_t c_out = 0;
  std::size_t t_out = 0;
};

struct ShapeTable {
  std::vector<std::vector<LayerShape>> layers;  // [block][layer]
  std::vector<std::optional<LayerShape>> skips;  // pointwise residual convs
};

/// Propagates shapes through the network and validates every structural
/// constraint. Errors name the offending block and layer.
ShapeTable propagate_shapes(const NetworkSpec& spec);

bool has_masks(const LayerSpec& layer);

std::string layer_name(std::size_t block, std::size_t layer);
std::string skip_name(std::size_t block);

/// Reads [network] and [block.*] sections; any section named in
/// `other_sections` is left to the caller, every other one is rejected.
NetworkSpec parse_network(const IniDocument& doc, const std::vector<std::string>& other_sections = {});
NetworkSpec load_network(const std::string& path);
std::string serialize_network(const NetworkSpec& spec);

/// Built-in seeds: "ecg_tcn" (residual TCN for 5-class ECG beats, length 140)
/// and "synth_small" (three 16-channel convs with receptive field 16).
NetworkSpec builtin_seed(std::string_view name);

std::string to_string(LayerKind k);
std::string to_string(Activation a);
std::string to_string(Residual r);
std::string to_string(TaskKind t);

}  // namespace pit
