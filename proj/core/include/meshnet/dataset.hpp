#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "meshnet/mesh.hpp"
#include "meshnet/network.hpp"
#include "meshnet/topology.hpp"

namespace meshnet {

enum class Split { kTrain, kTest };

struct DatasetEntry {
  std::filesystem::path mesh_path;
  Split split = Split::kTrain;
  int label = -1;                      // classification
  std::filesystem::path label_path;    // segmentation (.eseg)
};

struct Dataset {
  Task task = Task::kClassification;
  std::vector<std::string> class_names;
  std::vector<DatasetEntry> entries;

  std::size_t count(Split split) const;
};

// Classification: <root>/<class>/<train|test>/*.obj, class ids follow the
// sorted class directory names. Segmentation: <root>/<train|test>/*.obj,
// each with a sibling <name>.eseg. Entries are in lexicographic path order.
// Throws DataError for a missing root, no meshes, or a missing label file.
Dataset load_dataset(const std::filesystem::path& root, Task task);

// One 0-based integer per line; line i labels canonical edge i.
std::vector<int> read_eseg(const std::filesystem::path& path);
void write_eseg(const std::filesystem::path& path, const std::vector<int>& labels);

struct Sample {
  std::string name;
  Mesh mesh;
  EdgeTopology topo;
  int label = -1;
  std::vector<int> edge_labels;
};

// Loads the mesh, builds its topology and checks the label file length
// against the edge count (DataError naming both counts).
Sample load_sample(const DatasetEntry& entry, Task task);
std::vector<Sample> load_samples(const Dataset& dataset, Split split);

// Throws DataError when any label is outside [0, num_classes).
void check_labels(const std::vector<Sample>& samples, Task task, std::size_t num_classes);

}  // namespace meshnet
