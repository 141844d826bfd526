#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "meshnet/autodiff.hpp"
#include "meshnet/mesh_pool.hpp"

namespace meshnet {

enum class Task { kClassification, kSegmentation };

struct NetworkConfig {
  Task task = Task::kClassification;
  std::size_t input_channels = 5;
  std::size_t input_edges = 750;
  std::vector<std::size_t> conv_channels{32, 64, 128, 256};
  std::vector<std::size_t> pool_targets{600, 450, 300, 279};
  // Hidden widths followed by num_classes; classification only.
  std::vector<std::size_t> fc_dims{100, 2};
  std::size_t num_classes = 2;
  std::size_t norm_groups = 16;
  PoolMode pooling = PoolMode::kByNorm;

  bool operator==(const NetworkConfig&) const = default;
};

// Defaults for a task: 750-edge classification or 2250-edge segmentation.
NetworkConfig default_network_config(Task task, std::size_t num_classes);

// Throws ConfigError.
void validate(const NetworkConfig& config);

struct ForwardOptions {
  // Random pooling draws layer i's order from mix_seed(pool_seed, i).
  std::uint64_t pool_seed = 0;
  bool keep_levels = false;
};

struct PoolLevel {
  Mesh mesh;
  EdgeTopology topo;
  std::shared_ptr<const PoolHistory> history;
};

struct ForwardResult {
  // num_classes x 1 (classification) or num_classes x E (segmentation).
  Var logits;
  std::vector<PoolLevel> levels;
};

// Classification: [conv, ReLU, group norm, pool] per stage, global average
// over edges, then fully connected layers with ReLU between them.
// Segmentation: UNet of residual blocks with concatenated skips; mesh_unpool
// restores each encoder resolution, a final conv emits per-edge logits.
class Network {
 public:
  explicit Network(NetworkConfig config);

  // He-normal weights, zero biases, unit norm scales.
  void initialize(std::uint64_t seed);

  const NetworkConfig& config() const noexcept { return config_; }
  std::vector<Parameter<float>>& parameters() noexcept { return params_; }
  const std::vector<Parameter<float>>& parameters() const noexcept { return params_; }
  Parameter<float>* find(std::string_view name);
  std::size_t parameter_count() const;

  ForwardResult forward(Tape<float>& tape, const Mesh& mesh, const EdgeTopology& topo, const Tensor<float>& features,
                        const ForwardOptions& options = {}) const;

 private:
  struct ConvRef {
    std::size_t weight, bias;
  };
  struct NormRef {
    std::size_t gamma, beta;
  };
  struct LinearRef {
    std::size_t weight, bias;
  };
  struct ResRef {
    ConvRef conv1;
    NormRef norm1;
    ConvRef conv2;
    NormRef norm2;
    std::optional<LinearRef> shortcut;
  };

  std::size_t add(std::string name, std::vector<std::size_t> shape);
  ConvRef add_conv(const std::string& prefix, std::size_t in, std::size_t out);
  NormRef add_norm(const std::string& prefix, std::size_t channels);
  LinearRef add_linear(const std::string& prefix, std::size_t in, std::size_t out);
  ResRef add_res(const std::string& prefix, std::size_t in, std::size_t out);

  struct Bound;
  Var conv(Bound& b, const ConvRef& r, Var x, const EdgeTopology& topo) const;
  Var norm(Bound& b, const NormRef& r, Var x) const;
  Var res_block(Bound& b, const ResRef& r, Var x, const EdgeTopology& topo) const;

  NetworkConfig config_;
  std::vector<Parameter<float>> params_;
  std::vector<ConvRef> cls_convs_;
  std::vector<NormRef> cls_norms_;
  std::vector<LinearRef> fcs_;
  std::vector<ResRef> enc_;
  std::vector<ResRef> dec_;
  ConvRef head_{};
};

}  // namespace meshnet
