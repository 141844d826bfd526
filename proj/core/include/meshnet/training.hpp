#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "meshnet/checkpoint.hpp"
#include "meshnet/config.hpp"
#include "meshnet/dataset.hpp"
#include "meshnet/network.hpp"

namespace meshnet {

struct EvalMetrics {
  double loss = 0;      // mean per-mesh loss
  double accuracy = 0;  // per mesh (classification) or per edge (segmentation)
  std::size_t correct = 0;
  std::size_t total = 0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double batch_loss = 0;  // mean training loss over the epoch's steps
  EvalMetrics train;
  bool has_val = false;
  EvalMetrics val;
};

// One JSON object on a single line.
std::string to_json(const EpochMetrics& m);

struct TrainResult {
  Checkpoint best;  // highest validation accuracy (train accuracy without a validation set)
  Checkpoint last;
  std::size_t best_epoch = 0;
  std::vector<EpochMetrics> history;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Adam on the mean loss of each batch. Per-mesh gradients are computed
// independently (optionally on several threads) and summed in sample order,
// so results do not depend on the thread count. Features are standardized
// with statistics of the un-augmented training meshes. After every epoch
// both sets are evaluated without augmentation.
TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const RunConfig& config,
                  const EpochCallback& on_epoch = {});

struct TrainingSplit {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

// The dataset's test split is the validation set; without one, 10% of the
// training meshes (seeded shuffle) are held out.
TrainingSplit split_for_training(const Dataset& dataset, std::uint64_t seed);

TrainResult train(const Dataset& dataset, const RunConfig& config, const EpochCallback& on_epoch = {});

EvalMetrics evaluate(const Network& net, const FeatureStats& stats, const RunConfig& config,
                     const std::vector<Sample>& samples);
EvalMetrics evaluate(const Checkpoint& ckpt, const std::vector<Sample>& samples);

// Standardized float features as fed to the network.
Tensor<float> network_input(const Mesh& mesh, const EdgeTopology& topo, FeatureMode mode, const FeatureStats& stats);

struct Prediction {
  int label = -1;                // classification
  std::vector<int> edge_labels;  // segmentation, one per input edge
  Tensor<float> logits;
  std::vector<PoolLevel> levels;
};

Prediction infer(const Checkpoint& ckpt, const Mesh& mesh, const EdgeTopology& topo, bool keep_levels = false);

// Writes one colored PLY per pooling layer (<stem>_pool<i>.ply, i from 1). Pooled
// edges are colored by the predicted class, or for segmentation by the
// prediction of the input edge that survived into them.
std::vector<std::filesystem::path> export_pools(const Prediction& prediction, Task task,
                                                const std::filesystem::path& dir, const std::string& stem);

// Runs fn(i) for i in [0, n) on up to `threads` threads; rethrows the first
// exception.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace meshnet
