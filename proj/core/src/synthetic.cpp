#include "meshnet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "meshnet/dataset.hpp"
#include "meshnet/error.hpp"
#include "meshnet/primitives.hpp"
#include "meshnet/seed.hpp"
#include "meshnet/topology.hpp"

namespace fs = std::filesystem;

namespace meshnet {
namespace {

using Profile = std::vector<std::array<double, 2>>;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void arc(Profile& p, double cx, double cz, double rx, double rz, double from, double to, int steps) {
  for (int i = 1; i <= steps; ++i) {
    const double t = from + (to - from) * i / steps;
    p.push_back({cx + rx * std::cos(t), cz + rz * std::sin(t)});
  }
}

// Moves every vertex by a small random offset relative to its mean edge
// length so that no two edges tie exactly.
void jitter(Mesh& m, std::mt19937_64& rng, double amount) {
  const auto topo = build_edge_topology(m);
  double total = 0;
  for (const auto& e : topo.edges) {
    const auto& a = m.vertices[e[0]];
    const auto& b = m.vertices[e[1]];
    total += std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
  }
  const double scale = amount * total / static_cast<double>(topo.edge_count());
  std::normal_distribution<double> n(0.0, scale);
  for (auto& p : m.vertices)
    for (auto& x : p) x += n(rng);
}

std::size_t checked_edges(std::size_t target_edges) {
  if (target_edges < 20) throw ConfigError("synthetic meshes need at least 20 edges");
  return target_edges;
}

void write_mesh(const fs::path& path, const Mesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_obj(mesh, out);
}

}  // namespace

const std::vector<std::string>& synthetic_class_names() {
  static const std::vector<std::string> names{"sphere", "box", "cylinder", "cone", "capsule", "spindle"};
  return names;
}

std::size_t max_synthetic_classes() { return synthetic_class_names().size(); }

SyntheticShape make_class_shape(std::size_t class_index, std::size_t target_edges, std::mt19937_64& rng) {
  const auto grid = grid_for_edges(checked_edges(target_edges));
  const double a = uniform(rng, 0.7, 1.2);
  const double h = uniform(rng, 0.6, 1.2);
  Profile p;
  double exponent = 2.0;
  switch (class_index) {
    case 0:
      p.push_back({0, -h});
      arc(p, 0, 0, a, h, -std::numbers::pi / 2, std::numbers::pi / 2, 48);
      p.back()[0] = 0;
      break;
    case 1: {
      const double bump = uniform(rng, 0.25, 0.5) * h;
      p = {{0, -h}, {a, -h}, {a, h}, {0.45 * a, h}, {0, h + bump}};
      exponent = 8.0;
      break;
    }
    case 2:
      p = {{0, -h}, {a, -h}, {a, h}, {0, h}};
      break;
    case 3:
      p = {{0, -h}, {a, -h}, {0, h}};
      break;
    case 4:
      p.push_back({0, -h - a * 0.5});
      arc(p, 0, -h, a * 0.5, a * 0.5, -std::numbers::pi / 2, 0, 16);
      p.push_back({a * 0.5, h});
      arc(p, 0, h, a * 0.5, a * 0.5, 0, std::numbers::pi / 2, 16);
      p.back()[0] = 0;
      break;
    case 5:
      p = {{0, -h}, {a, 0}, {0, h}};
      break;
    default:
      throw ConfigError("synthetic classification supports at most " + std::to_string(max_synthetic_classes()) +
                        " classes");
  }
  SyntheticShape s;
  s.mesh = revolve(p, grid.segments, grid.rings, exponent);
  s.mesh = transform_mesh(s.mesh, random_rotation(rng));
  jitter(s.mesh, rng, 0.02);
  return s;
}

SyntheticShape make_part_shape(std::size_t parts, std::size_t target_edges, std::mt19937_64& rng) {
  if (parts != 2 && parts != 3) throw ConfigError("synthetic segmentation supports 2 or 3 parts");
  const auto grid = grid_for_edges(checked_edges(target_edges));
  const double a = uniform(rng, 0.8, 1.2);
  const double h = uniform(rng, 0.9, 1.4);
  const double c = uniform(rng, 0.6, 1.1);
  Profile p{{0, -h}, {a, -h}, {a, 0}};
  arc(p, 0, 0, a, c, 0, std::numbers::pi / 2, 32);
  p.back()[0] = 0;

  // Arc-length positions where the base cap ends and the dome starts.
  const double base_end = a;
  const double dome_start = a + h;
  double total = 0;
  for (std::size_t i = 1; i < p.size(); ++i) total += std::hypot(p[i][0] - p[i - 1][0], p[i][1] - p[i - 1][1]);

  std::vector<double> ring_param;
  SyntheticShape s;
  s.mesh = revolve(p, grid.segments, grid.rings, 2.0, &ring_param);
  std::vector<double> vparam(s.mesh.vertex_count());
  vparam.front() = 0;
  vparam.back() = total;
  for (int k = 0; k < grid.rings; ++k)
    for (int j = 0; j < grid.segments; ++j) vparam[1 + k * grid.segments + j] = ring_param[k] * total;

  const auto topo = build_edge_topology(s.mesh);
  s.edge_labels.resize(topo.edge_count());
  for (std::size_t e = 0; e < topo.edge_count(); ++e) {
    const double t = 0.5 * (vparam[topo.edges[e][0]] + vparam[topo.edges[e][1]]);
    if (parts == 2) {
      s.edge_labels[e] = t >= dome_start ? 1 : 0;
    } else {
      s.edge_labels[e] = t >= dome_start ? 2 : (t >= base_end ? 1 : 0);
    }
  }

  s.mesh = transform_mesh(s.mesh, rotation_z(uniform(rng, 0, 2 * std::numbers::pi)));
  jitter(s.mesh, rng, 0.02);
  double lo = 1e300, hi = -1e300;
  for (const auto& v : s.mesh.vertices) {
    lo = std::min(lo, v[2]);
    hi = std::max(hi, v[2]);
  }
  const Mat3 identity{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  s.mesh = transform_mesh(s.mesh, identity, {0, 0, -(lo + hi) / 2});
  return s;
}

std::size_t gen_synthetic(const fs::path& out_dir, const SyntheticSpec& spec) {
  checked_edges(spec.target_edges);
  if (spec.count < 1) throw ConfigError("synthetic count must be at least 1");
  if (!(spec.test_fraction >= 0 && spec.test_fraction < 1)) throw ConfigError("test_fraction must lie in [0, 1)");
  const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(spec.count)));
  auto split_of = [&](std::size_t i) { return i + n_test >= spec.count ? "test" : "train"; };
  char name[64];
  std::size_t written = 0;
  if (spec.task == Task::kClassification) {
    if (spec.classes < 2 || spec.classes > max_synthetic_classes()) {
      throw ConfigError("synthetic classification needs 2.." + std::to_string(max_synthetic_classes()) + " classes");
    }
    for (std::size_t c = 0; c < spec.classes; ++c) {
      const auto& cname = synthetic_class_names()[c];
      for (std::size_t i = 0; i < spec.count; ++i) {
        std::mt19937_64 rng(mix_seed(spec.seed, c, i));
        const auto shape = make_class_shape(c, spec.target_edges, rng);
        const auto dir = out_dir / cname / split_of(i);
        fs::create_directories(dir);
        std::snprintf(name, sizeof name, "%s_%03zu.obj", cname.c_str(), i);
        write_mesh(dir / name, shape.mesh);
        ++written;
      }
    }
  } else {
    for (std::size_t i = 0; i < spec.count; ++i) {
      std::mt19937_64 rng(mix_seed(spec.seed, 1000 + spec.classes, i));
      const auto shape = make_part_shape(spec.classes, spec.target_edges, rng);
      const auto dir = out_dir / split_of(i);
      fs::create_directories(dir);
      std::snprintf(name, sizeof name, "shape_%03zu", i);
      write_mesh(dir / (std::string(name) + ".obj"), shape.mesh);
      write_eseg(dir / (std::string(name) + ".eseg"), shape.edge_labels);
      ++written;
    }
  }
  return written;
}

}  // namespace meshnet
