#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "meshnet/checkpoint.hpp"
#include "meshnet/config.hpp"
#include "meshnet/dataset.hpp"
#include "meshnet/error.hpp"
#include "meshnet/features.hpp"
#include "meshnet/mesh_pool.hpp"
#include "meshnet/synthetic.hpp"
#include "meshnet/topology.hpp"
#include "meshnet/training.hpp"

namespace fs = std::filesystem;
using namespace meshnet;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;

int cmd_train(const std::string& config_path) {
  const RunConfig config = load_config(config_path);
  if (config.data_dir.empty()) throw ConfigError("config must set data_dir");
  const Dataset ds = load_dataset(config.data_dir, config.network.task);
  std::ofstream metrics;
  if (!config.metrics_file.empty()) {
    metrics.open(config.metrics_file, std::ios::app);
    if (!metrics) throw Error("cannot open metrics file " + config.metrics_file);
  }
  const auto result = train(ds, config, [&](const EpochMetrics& m) {
    const auto line = to_json(m);
    std::cout << line << std::endl;
    if (metrics.is_open()) metrics << line << '\n' << std::flush;
  });
  save_checkpoint(result.best, config.checkpoint);
  save_checkpoint(result.last, config.checkpoint + ".last");
  if (result.best_epoch == 0) {
    std::cerr << "saved untrained " << config.checkpoint << "\n";
  } else {
    std::cerr << "saved " << config.checkpoint << " (best at epoch " << result.best_epoch - 1 << ")\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& ckpt_path, const std::string& data_dir) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Dataset ds = load_dataset(data_dir, ckpt.config.network.task);
  for (Split split : {Split::kTrain, Split::kTest}) {
    if (ds.count(split) == 0) continue;
    const auto samples = load_samples(ds, split);
    const auto m = evaluate(ckpt, samples);
    nlohmann::ordered_json j;
    j["split"] = split == Split::kTrain ? "train" : "test";
    j["meshes"] = samples.size();
    j["loss"] = m.loss;
    j["accuracy"] = m.accuracy;
    std::cout << j.dump() << '\n';
  }
  return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::string& input, const std::string& export_dir,
              const std::string& output) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Mesh mesh = load_obj(input);
  const EdgeTopology topo = build_edge_topology(mesh);
  const auto task = ckpt.config.network.task;
  const auto p = infer(ckpt, mesh, topo, !export_dir.empty());
  nlohmann::ordered_json j;
  j["input"] = input;
  j["edges"] = topo.edge_count();
  if (task == Task::kClassification) {
    j["label"] = p.label;
  } else {
    std::vector<std::size_t> counts(ckpt.config.network.num_classes, 0);
    for (int l : p.edge_labels) ++counts[static_cast<std::size_t>(l)];
    j["label_counts"] = counts;
  }
  if (!export_dir.empty()) {
    const auto stem = fs::path(input).stem().string();
    std::vector<std::string> files;
    for (const auto& f : export_pools(p, task, export_dir, stem)) files.push_back(f.string());
    std::vector<int> labels = task == Task::kClassification ? std::vector<int>(topo.edge_count(), p.label) : p.edge_labels;
    const auto pred = fs::path(export_dir) / (stem + "_pred.ply");
    export_mesh(mesh, topo, std::span<const int>(labels), pred);
    j["pooled_meshes"] = files;
    j["prediction_mesh"] = pred.string();
  }
  if (!output.empty()) {
    if (task == Task::kSegmentation) {
      write_eseg(output, p.edge_labels);
    } else {
      std::ofstream out(output);
      if (!out) throw Error("cannot write " + output);
      out << p.label << '\n';
    }
  }
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_gen(const std::string& out, const std::string& task, const SyntheticSpec& base) {
  SyntheticSpec spec = base;
  if (task == "cls" || task == "classification") {
    spec.task = Task::kClassification;
  } else if (task == "seg" || task == "segmentation") {
    spec.task = Task::kSegmentation;
  } else {
    throw ConfigError("--task must be cls or seg");
  }
  const auto n = gen_synthetic(out, spec);
  std::cout << "wrote " << n << " meshes to " << out << '\n';
  return 0;
}

int cmd_inspect(const std::string& input) {
  LoadReport report;
  const Mesh mesh = load_obj(input, &report);
  const EdgeTopology topo = build_edge_topology(mesh);
  validate_topology(mesh, topo);
  std::cout << "vertices: " << mesh.vertex_count() << '\n';
  std::cout << "faces: " << mesh.face_count() << '\n';
  std::cout << "edges: " << topo.edge_count() << '\n';
  std::cout << "boundary edges: " << topo.boundary_count() << '\n';
  std::cout << "euler characteristic: " << euler_characteristic(mesh, topo) << '\n';
  if (report.isolated_vertices_dropped) std::cout << "isolated vertices dropped: " << report.isolated_vertices_dropped << '\n';
  const auto f = compute_input_features(mesh, topo);
  static const char* names[] = {"dihedral", "inner_angle_lo", "inner_angle_hi", "ratio_lo", "ratio_hi"};
  for (std::size_t c = 0; c < f.rows(); ++c) {
    double lo = 1e300, hi = -1e300, sum = 0, sq = 0;
    for (double v : f.row(c)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
      sq += v * v;
    }
    const double n = static_cast<double>(f.cols());
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(0.0, sq / n - mean * mean));
    std::printf("feature %-14s mean %.6f std %.6f min %.6f max %.6f\n", names[c], mean, sd, lo, hi);
  }
  return 0;
}

int cmd_decimate(const std::string& input, const std::string& output, std::size_t edges, std::uint64_t seed) {
  const Mesh mesh = load_obj(input);
  const EdgeTopology topo = build_edge_topology(mesh);
  const PoolPlan plan = decimate(mesh, topo, edges, seed);
  std::ofstream out(output);
  if (!out) throw Error("cannot write " + output);
  write_obj(plan.mesh, out);
  std::cout << topo.edge_count() << " -> " << plan.topo.edge_count() << " edges\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge-based mesh convolution networks: train, evaluate, infer, generate, inspect"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train_cmd = app.add_subcommand("train", "Train a network from a config file");
  train_cmd->add_option("--config", config_path, "key = value config file")->required();

  std::string ckpt_path, data_dir;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", ckpt_path)->required();
  eval_cmd->add_option("--data", data_dir)->required();

  std::string input, export_dir, output;
  auto* infer_cmd = app.add_subcommand("infer", "Predict labels for one mesh");
  infer_cmd->add_option("--checkpoint", ckpt_path)->required();
  infer_cmd->add_option("--input", input)->required();
  infer_cmd->add_option("--export-pools", export_dir, "Write each pooled mesh as colored PLY here");
  infer_cmd->add_option("--output", output, "Write predicted labels (eseg for segmentation)");

  std::string out_dir, task = "cls";
  SyntheticSpec spec;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Write a synthetic dataset");
  gen_cmd->add_option("--out", out_dir)->required();
  gen_cmd->add_option("--task", task, "cls or seg")->capture_default_str();
  gen_cmd->add_option("--classes", spec.classes, "Shape classes, or part labels for seg")->capture_default_str();
  gen_cmd->add_option("--count", spec.count, "Meshes per class (cls) or in total (seg)")->capture_default_str();
  gen_cmd->add_option("--edges", spec.target_edges)->capture_default_str();
  gen_cmd->add_option("--seed", spec.seed)->capture_default_str();
  gen_cmd->add_option("--test-fraction", spec.test_fraction)->capture_default_str();

  auto* inspect_cmd = app.add_subcommand("inspect", "Print mesh statistics");
  inspect_cmd->add_option("--input", input)->required();

  std::size_t target_edges = 750;
  std::uint64_t decimate_seed = 0;
  auto* dec_cmd = app.add_subcommand("decimate", "Collapse edges in random order down to a target count");
  dec_cmd->add_option("--input", input)->required();
  dec_cmd->add_option("--output", output)->required();
  dec_cmd->add_option("--edges", target_edges)->capture_default_str();
  dec_cmd->add_option("--seed", decimate_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (*train_cmd) return cmd_train(config_path);
    if (*eval_cmd) return cmd_evaluate(ckpt_path, data_dir);
    if (*infer_cmd) return cmd_infer(ckpt_path, input, export_dir, output);
    if (*gen_cmd) return cmd_gen(out_dir, task, spec);
    if (*inspect_cmd) return cmd_inspect(input);
    if (*dec_cmd) return cmd_decimate(input, output, target_edges, decimate_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}
