#include "meshnet/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "meshnet/error.hpp"

namespace meshnet {
namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

double angle_between(const Vec3& a, const Vec3& b) {
  // atan2 form stays accurate near 0 and pi.
  return std::atan2(norm(cross(a, b)), dot(a, b));
}

struct FaceGeometry {
  Vec3 unit_normal;
  double area;
};

VertexId opposite_vertex(const Face& f, const std::array<VertexId, 2>& e) {
  for (auto v : f)
    if (v != e[0] && v != e[1]) return v;
  return f[0];
}

}  // namespace

EdgeFeatures compute_input_features(const Mesh& mesh, const EdgeTopology& topo) {
  const auto nf = mesh.faces.size();
  std::vector<FaceGeometry> faces(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& face = mesh.faces[f];
    const Vec3 n = cross(sub(mesh.vertices[face[1]], mesh.vertices[face[0]]),
                         sub(mesh.vertices[face[2]], mesh.vertices[face[0]]));
    const double len = norm(n);
    const double area = 0.5 * len;
    if (!(area >= kDegenerateArea)) {
      throw TopologyError("degenerate face " + std::to_string(f) + " (area " + std::to_string(area) + ")");
    }
    faces[f] = {{n[0] / len, n[1] / len, n[2] / len}, area};
  }

  const auto ne = topo.edge_count();
  EdgeFeatures out = EdgeFeatures::matrix(kInvariantChannels, ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& ev = topo.edges[e];
    const Vec3& p = mesh.vertices[ev[0]];
    const Vec3& q = mesh.vertices[ev[1]];
    const double len2 = dot(sub(q, p), sub(q, p));

    double angle[2];
    double ratio[2];
    const int sides = topo.edge_faces[e][1] == kNoFace ? 1 : 2;
    for (int s = 0; s < sides; ++s) {
      const auto f = static_cast<std::size_t>(topo.edge_faces[e][s]);
      const Vec3& w = mesh.vertices[opposite_vertex(mesh.faces[f], ev)];
      angle[s] = angle_between(sub(p, w), sub(q, w));
      // |e| / h with h = 2A / |e|
      ratio[s] = len2 / (2.0 * faces[f].area);
    }
    double dihedral = std::numbers::pi;
    if (sides == 2) {
      const double c = std::clamp(dot(faces[static_cast<std::size_t>(topo.edge_faces[e][0])].unit_normal,
                                      faces[static_cast<std::size_t>(topo.edge_faces[e][1])].unit_normal),
                                  -1.0, 1.0);
      dihedral = std::numbers::pi - std::acos(c);
    } else {
      angle[1] = angle[0];
      ratio[1] = ratio[0];
    }
    out(0, e) = dihedral;
    out(1, e) = std::min(angle[0], angle[1]);
    out(2, e) = std::max(angle[0], angle[1]);
    out(3, e) = std::min(ratio[0], ratio[1]);
    out(4, e) = std::max(ratio[0], ratio[1]);
  }
  return out;
}

EdgeFeatures compute_midpoint_features(const Mesh& mesh, const EdgeTopology& topo) {
  const auto ne = topo.edge_count();
  EdgeFeatures out = EdgeFeatures::matrix(kMidpointChannels, ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& a = mesh.vertices[topo.edges[e][0]];
    const auto& b = mesh.vertices[topo.edges[e][1]];
    for (std::size_t c = 0; c < 3; ++c) out(c, e) = (a[c] + b[c]) / 2.0;
  }
  return out;
}

EdgeFeatures compute_features(const Mesh& mesh, const EdgeTopology& topo, FeatureMode mode) {
  return mode == FeatureMode::kInvariant ? compute_input_features(mesh, topo)
                                         : compute_midpoint_features(mesh, topo);
}

FeatureStats fit_stats(std::span<const EdgeFeatures> tensors) {
  if (tensors.empty()) throw DataError("fit_stats: empty collection");
  const auto channels = tensors.front().rows();
  std::vector<double> sum(channels, 0.0);
  std::size_t count = 0;
  for (const auto& t : tensors) {
    if (t.rows() != channels) throw ShapeError("fit_stats: channel counts differ");
    for (std::size_t c = 0; c < channels; ++c)
      for (auto v : t.row(c)) sum[c] += v;
    count += t.cols();
  }
  if (count == 0) throw DataError("fit_stats: tensors have no edges");
  FeatureStats stats;
  stats.mean.resize(channels);
  stats.std.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) stats.mean[c] = sum[c] / static_cast<double>(count);
  std::vector<double> ss(channels, 0.0);
  for (const auto& t : tensors)
    for (std::size_t c = 0; c < channels; ++c)
      for (auto v : t.row(c)) ss[c] += (v - stats.mean[c]) * (v - stats.mean[c]);
  for (std::size_t c = 0; c < channels; ++c) {
    stats.std[c] = std::max(std::sqrt(ss[c] / static_cast<double>(count)), kStdFloor);
  }
  return stats;
}

EdgeFeatures apply_stats(const EdgeFeatures& t, const FeatureStats& stats) {
  if (t.rows() != stats.mean.size()) {
    throw ShapeError("apply_stats: tensor has " + std::to_string(t.rows()) + " channels, stats have " +
                     std::to_string(stats.mean.size()));
  }
  EdgeFeatures out = t;
  for (std::size_t c = 0; c < t.rows(); ++c) {
    const double sd = std::max(stats.std[c], kStdFloor);
    for (auto& v : out.row(c)) v = (v - stats.mean[c]) / sd;
  }
  return out;
}

}  // namespace meshnet
