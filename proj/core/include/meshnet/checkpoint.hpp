#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "meshnet/adam.hpp"
#include "meshnet/config.hpp"
#include "meshnet/features.hpp"
#include "meshnet/network.hpp"

namespace meshnet {

inline constexpr int kCheckpointVersion = 1;

struct AdamMoments {
  std::int64_t step = 0;
  std::vector<Tensor<float>> m;
  std::vector<Tensor<float>> v;

  bool operator==(const AdamMoments&) const = default;
};

// Single file: a text header (format line, the effective config as
// `key = value` lines, training state, a tensor manifest of name, shape and
// byte offset) terminated by "end_header", then little-endian float32
// tensor data.
struct Checkpoint {
  RunConfig config;
  FeatureStats stats;
  std::vector<Parameter<float>> parameters;
  std::optional<AdamMoments> adam;
  std::size_t epoch = 0;

  bool operator==(const Checkpoint&) const;
};

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws ParseError for malformed files and ShapeError when the tensors do
// not match the architecture described by the stored config.
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(const RunConfig& config, const FeatureStats& stats, const Network& net,
                           std::size_t epoch, const AdamState<float>* adam = nullptr);
// Network with the checkpoint's weights.
Network restore_network(const Checkpoint& ckpt);

}  // namespace meshnet
