#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dnirb/network.hpp"

namespace dnirb {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ManifestEntry {
  std::string name;
  Shape shape;               // (c_out, c_in, k, k) for weights, (c_out,1,1,1) for bias
  std::uint64_t byte_offset; // into the payload
  std::uint64_t elements;
};

/// Header and manifest of a checkpoint, without the parameter values.
struct CheckpointInfo {
  std::uint32_t version = 0;
  NetworkConfig config;
  std::uint32_t feature_channels = 0;
  std::uint32_t bottleneck_channels = 0;
  std::uint32_t input_channels = 0;
  std::vector<ManifestEntry> entries;
  std::uint64_t payload_bytes = 0;
  std::uint32_t checksum = 0;

  /// Sum of element counts over the manifest.
  std::uint64_t parameter_count() const;
};

/// Serialises `params` to the on-disk layout documented in
/// docs/checkpoint_format.md.
std::vector<std::uint8_t> encode_checkpoint(const NetworkParams& params);
NetworkParams decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                                CheckpointInfo* info = nullptr);

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);

/// Loads a checkpoint. When `expected` is given, the stored hyperparameters
/// must match it or HyperparameterMismatchError is thrown.
NetworkParams load_checkpoint(const std::filesystem::path& path,
                              const std::optional<NetworkConfig>& expected = std::nullopt);

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size);

}  // namespace dnirb
