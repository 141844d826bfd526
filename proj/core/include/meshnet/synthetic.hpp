#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "meshnet/mesh.hpp"
#include "meshnet/network.hpp"

namespace meshnet {

struct SyntheticSpec {
  Task task = Task::kClassification;
  // Shape classes (classification) or part labels (segmentation, 2 or 3).
  std::size_t classes = 2;
  // Meshes per class (classification) or in total (segmentation).
  std::size_t count = 20;
  std::size_t target_edges = 750;
  std::uint64_t seed = 0;
  double test_fraction = 0.25;
};

struct SyntheticShape {
  Mesh mesh;
  std::vector<int> edge_labels;  // segmentation only
};

// Class names in generation order; directory names sort differently, so
// class ids come from load_dataset.
const std::vector<std::string>& synthetic_class_names();
std::size_t max_synthetic_classes();

// Randomly proportioned, rotated and jittered surface of revolution.
SyntheticShape make_class_shape(std::size_t class_index, std::size_t target_edges, std::mt19937_64& rng);
// Upright body with a dome on top, random yaw, centred on its bounding box;
// edges labelled by part (body/dome, or base/side/dome for 3 parts).
SyntheticShape make_part_shape(std::size_t parts, std::size_t target_edges, std::mt19937_64& rng);

// Writes the dataset layout read by load_dataset. Deterministic in spec.seed.
// Returns the number of meshes written.
std::size_t gen_synthetic(const std::filesystem::path& out_dir, const SyntheticSpec& spec);

}  // namespace meshnet
