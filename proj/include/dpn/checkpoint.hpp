#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpn/graph.hpp"

namespace dpn::nn {

/// Binary parameter checkpoint:
///
///   "DPN1"
///   per parameter: u32 name length, name bytes, u32 rank, u64 extents[rank],
///                  f64 values (little-endian)
///   u64 FNV-1a checksum of every preceding byte
///
/// Integers are little-endian.
std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& params);
ParameterSet decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path);
ParameterSet load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size);

}  // namespace dpn::nn
