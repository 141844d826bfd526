#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "meshnet/augment.hpp"
#include "meshnet/features.hpp"
#include "meshnet/network.hpp"

namespace meshnet {

struct TrainParams {
  std::size_t epochs = 200;
  double lr = 2e-4;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  bool operator==(const TrainParams&) const = default;
};

// Everything a `key = value` file can set, with defaults resolved.
struct RunConfig {
  NetworkConfig network;
  FeatureMode feature_mode = FeatureMode::kInvariant;
  TrainParams train;
  AugmentParams augment;
  std::string data_dir;
  std::string checkpoint = "model.ckpt";
  std::string metrics_file;

  bool operator==(const RunConfig&) const = default;
};

const std::vector<std::string>& config_keys();

// Blank lines and lines starting with '#' are ignored. Keys that are not
// given take the defaults of the configured task. Throws ConfigError naming
// the line for malformed or unknown keys.
RunConfig parse_config(std::istream& in);
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Every key, one per line, in config_keys() order; parse_config reads it
// back to an equal RunConfig.
std::string serialize_config(const RunConfig& config);

void validate(const RunConfig& config);

std::string_view task_name(Task task);
std::string_view feature_mode_name(FeatureMode mode);
std::string_view pool_mode_name(PoolMode mode);

}  // namespace meshnet
