#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pit/tensor.hpp"

namespace pit {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline constexpr std::uint32_t kContainerVersion = 1;

/// Binary tensor container, all integers little-endian:
///   "PITD" | u32 version | u32 record count |
///   per record: u32 name length, name bytes (UTF-8), u32 rank,
///               rank x u32 extents, numel x float32 payload.
/// Values are stored in single precision.
void save_tensors(const std::string& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::string& path);

std::string encode_tensors(const NamedTensors& tensors);
NamedTensors decode_tensors(const std::string& bytes, const std::string& origin = "<memory>");

}  // namespace pit
