#pragma once

#include "latim/config.hpp"
#include "latim/weights.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace latim {

// On-disk layout, all integers little-endian:
//   "LTIM" | u32 format version | u64 manifest length | UTF-8 JSON manifest | payload
// The manifest carries the config, a tensor directory (name -> dtype, shape,
// byte offset, byte length, offsets relative to the payload start) and a CRC-32
// of the payload. Tensors are raw IEEE-754 in the config's dtype, row-major.
inline constexpr std::uint32_t bundle_format_version = 1;

struct bundle {
    model_config config;
    // f32 bundles load exactly into doubles; cast to float for f32 compute.
    model_weights<double> weights;
};

std::vector<std::uint8_t> serialize_bundle(const model_weights<double>& weights, const model_config& config);
bundle parse_bundle(std::span<const std::uint8_t> bytes);

void save_bundle(const model_weights<double>& weights, const model_config& config,
                 const std::filesystem::path& path);
bundle load_bundle(const std::filesystem::path& path);

} // namespace latim
