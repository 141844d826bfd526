#include "meshnet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "meshnet/error.hpp"

namespace fs = std::filesystem;

namespace meshnet {
namespace {

std::vector<fs::path> sorted_objs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".obj") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

const char* split_dir(Split s) { return s == Split::kTrain ? "train" : "test"; }

}  // namespace

std::size_t Dataset::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [split](const DatasetEntry& e) { return e.split == split; }));
}

Dataset load_dataset(const fs::path& root, Task task) {
  if (!fs::is_directory(root)) throw DataError("dataset directory " + root.string() + " does not exist");
  Dataset ds;
  ds.task = task;
  if (task == Task::kClassification) {
    std::vector<fs::path> classes;
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory()) classes.push_back(e.path());
    std::sort(classes.begin(), classes.end());
    for (std::size_t c = 0; c < classes.size(); ++c) {
      ds.class_names.push_back(classes[c].filename().string());
      for (Split s : {Split::kTrain, Split::kTest}) {
        for (auto& p : sorted_objs(classes[c] / split_dir(s))) {
          ds.entries.push_back({std::move(p), s, static_cast<int>(c), {}});
        }
      }
    }
  } else {
    for (Split s : {Split::kTrain, Split::kTest}) {
      for (auto& p : sorted_objs(root / split_dir(s))) {
        auto label = p;
        label.replace_extension(".eseg");
        if (!fs::is_regular_file(label)) throw DataError("missing label file " + label.string());
        ds.entries.push_back({std::move(p), s, -1, std::move(label)});
      }
    }
  }
  std::sort(ds.entries.begin(), ds.entries.end(),
            [](const DatasetEntry& a, const DatasetEntry& b) { return a.mesh_path < b.mesh_path; });
  if (ds.entries.empty()) throw DataError("no meshes found under " + root.string());
  return ds;
}

std::vector<int> read_eseg(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label file " + path.string());
  std::vector<int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    int v = 0;
    auto [p, ec] = std::from_chars(line.data(), line.data() + line.size(), v);
    if (ec != std::errc() || p != line.data() + line.size() || v < 0) {
      throw ParseError(path.string() + ": expected a non-negative integer label", lineno);
    }
    labels.push_back(v);
  }
  return labels;
}

void write_eseg(const fs::path& path, const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (int l : labels) out << l << '\n';
}

Sample load_sample(const DatasetEntry& entry, Task task) {
  Sample s;
  s.name = entry.mesh_path.string();
  s.mesh = load_obj(entry.mesh_path);
  s.topo = build_edge_topology(s.mesh);
  s.label = entry.label;
  if (task == Task::kSegmentation) {
    s.edge_labels = read_eseg(entry.label_path);
    if (s.edge_labels.size() != s.topo.edge_count()) {
      throw DataError(entry.label_path.string() + " has " + std::to_string(s.edge_labels.size()) +
                      " labels but the mesh has " + std::to_string(s.topo.edge_count()) + " edges");
    }
  }
  return s;
}

std::vector<Sample> load_samples(const Dataset& dataset, Split split) {
  std::vector<Sample> out;
  for (const auto& e : dataset.entries)
    if (e.split == split) out.push_back(load_sample(e, dataset.task));
  return out;
}

void check_labels(const std::vector<Sample>& samples, Task task, std::size_t num_classes) {
  const auto n = static_cast<int>(num_classes);
  for (const auto& s : samples) {
    if (task == Task::kClassification) {
      if (s.label < 0 || s.label >= n) {
        throw DataError(s.name + ": class label " + std::to_string(s.label) + " is outside [0, " +
                        std::to_string(n) + ")");
      }
    } else {
      for (int l : s.edge_labels) {
        if (l < 0 || l >= n) {
          throw DataError(s.name + ": edge label " + std::to_string(l) + " is outside [0, " + std::to_string(n) + ")");
        }
      }
    }
  }
}

}  // namespace meshnet
