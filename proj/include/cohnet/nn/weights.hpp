#pragma once

#include <filesystem>
#include <vector>

#include "cohnet/fileutil.hpp"
#include "cohnet/nn/network.hpp"

namespace cohnet::nn {

// CWT1 layout, little-endian:
//   "CWT1" | u32 tensor count | per tensor: u8 rank, u32 dims[rank], f32 payload
//   | u64 FNV-1a over all payload bytes
// Tensor 0 is a rank-1 metadata tensor (possibly empty); then weight and bias
// of every parametric layer in network order.

Bytes encode_weights(const Network<float>& net, const std::vector<float>& metadata = {});

/// Loads into an existing architecture. Returns the metadata tensor.
std::vector<float> decode_weights(std::span<const std::uint8_t> bytes, Network<float>& net);

void save_weights(const Network<float>& net, const std::filesystem::path& path,
                  const std::vector<float>& metadata = {});
std::vector<float> load_weights(const std::filesystem::path& path, Network<float>& net);

/// FNV-1a of the whole file, for freeze checks.
std::uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace cohnet::nn
