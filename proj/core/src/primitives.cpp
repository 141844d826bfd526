#include "meshnet/primitives.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "meshnet/error.hpp"

namespace meshnet {
namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(dot(v, v));
  return {v[0] / n, v[1] / n, v[2] / n};
}

// Flips faces of a convex, origin-centred solid so normals point away from
// the origin.
void orient_outward(Mesh& m) {
  for (auto& f : m.faces) {
    const auto& a = m.vertices[f[0]];
    const auto& b = m.vertices[f[1]];
    const auto& c = m.vertices[f[2]];
    const Vec3 centroid{a[0] + b[0] + c[0], a[1] + b[1] + c[1], a[2] + b[2] + c[2]};
    if (dot(cross(sub(b, a), sub(c, a)), centroid) < 0) std::swap(f[1], f[2]);
  }
}

// Grid faces between consecutive rings, plus pole caps. Ring k vertex j is
// 1 + k * s + j; poles are 0 and 1 + rings * s.
std::vector<Face> pole_grid_faces(int s, int rings) {
  std::vector<Face> faces;
  auto id = [s](int k, int j) { return 1 + k * s + (j % s); };
  const int top = 1 + rings * s;
  for (int j = 0; j < s; ++j) faces.push_back({0, id(0, j + 1), id(0, j)});
  for (int k = 0; k + 1 < rings; ++k) {
    for (int j = 0; j < s; ++j) {
      faces.push_back({id(k, j), id(k, j + 1), id(k + 1, j + 1)});
      faces.push_back({id(k, j), id(k + 1, j + 1), id(k + 1, j)});
    }
  }
  for (int j = 0; j < s; ++j) faces.push_back({top, id(rings - 1, j), id(rings - 1, j + 1)});
  return faces;
}

}  // namespace

Mesh tetrahedron() {
  Mesh m;
  m.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  m.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  orient_outward(m);
  return m;
}

Mesh octahedron() {
  Mesh m;
  m.vertices = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  m.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  orient_outward(m);
  return m;
}

Mesh icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Mesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : m.vertices) v = normalized(v);
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  orient_outward(m);
  return m;
}

Mesh icosphere(int level) {
  if (level < 0) throw Error("icosphere: negative level");
  Mesh m = icosahedron();
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<VertexId, VertexId>, VertexId> mid;
    auto midpoint = [&](VertexId a, VertexId b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const auto& pa = m.vertices[a];
      const auto& pb = m.vertices[b];
      m.vertices.push_back(normalized({pa[0] + pb[0], pa[1] + pb[1], pa[2] + pb[2]}));
      const auto id = static_cast<VertexId>(m.vertices.size() - 1);
      mid.emplace(key, id);
      return id;
    };
    std::vector<Face> faces;
    faces.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const auto a = midpoint(f[0], f[1]);
      const auto b = midpoint(f[1], f[2]);
      const auto c = midpoint(f[2], f[0]);
      faces.push_back({f[0], a, c});
      faces.push_back({f[1], b, a});
      faces.push_back({f[2], c, b});
      faces.push_back({a, b, c});
    }
    m.faces = std::move(faces);
  }
  return m;
}

Mesh uv_sphere(int segments, int rings) {
  if (segments < 3 || rings < 1) throw Error("uv_sphere: need segments >= 3 and rings >= 1");
  Mesh m;
  m.vertices.push_back({0, 0, -1});
  for (int k = 0; k < rings; ++k) {
    const double theta = std::numbers::pi * (k + 1) / (rings + 1);
    for (int j = 0; j < segments; ++j) {
      const double phi = 2 * std::numbers::pi * j / segments;
      m.vertices.push_back({std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), -std::cos(theta)});
    }
  }
  m.vertices.push_back({0, 0, 1});
  m.faces = pole_grid_faces(segments, rings);
  return m;
}

Mesh revolve(const std::vector<std::array<double, 2>>& profile, int segments, int rings, double cross_exponent,
             std::vector<double>* ring_param) {
  if (segments < 3 || rings < 1) throw Error("revolve: need segments >= 3 and rings >= 1");
  if (profile.size() < 2 || profile.front()[0] != 0.0 || profile.back()[0] != 0.0) {
    throw Error("revolve: profile must start and end on the axis");
  }
  std::vector<double> cum(profile.size(), 0.0);
  for (std::size_t i = 1; i < profile.size(); ++i) {
    cum[i] = cum[i - 1] + std::hypot(profile[i][0] - profile[i - 1][0], profile[i][1] - profile[i - 1][1]);
  }
  const double total = cum.back();
  auto at = [&](double s) {
    auto it = std::upper_bound(cum.begin(), cum.end(), s);
    std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(it - cum.begin()), 1, profile.size() - 1);
    const double len = cum[i] - cum[i - 1];
    const double w = len > 0 ? (s - cum[i - 1]) / len : 0.0;
    return std::array<double, 2>{profile[i - 1][0] + w * (profile[i][0] - profile[i - 1][0]),
                                 profile[i - 1][1] + w * (profile[i][1] - profile[i - 1][1])};
  };

  Mesh m;
  m.vertices.push_back({0, 0, profile.front()[1]});
  if (ring_param) ring_param->clear();
  for (int k = 0; k < rings; ++k) {
    const double frac = static_cast<double>(k + 1) / (rings + 1);
    const auto rz = at(frac * total);
    if (ring_param) ring_param->push_back(frac);
    for (int j = 0; j < segments; ++j) {
      const double phi = 2 * std::numbers::pi * j / segments;
      const double c = std::cos(phi), s = std::sin(phi);
      const double shape =
          std::pow(std::pow(std::abs(c), cross_exponent) + std::pow(std::abs(s), cross_exponent), -1.0 / cross_exponent);
      m.vertices.push_back({rz[0] * shape * c, rz[0] * shape * s, rz[1]});
    }
  }
  m.vertices.push_back({0, 0, profile.back()[1]});
  m.faces = pole_grid_faces(segments, rings);
  return m;
}

Mesh grid_patch(int nx, int ny) {
  if (nx < 2 || ny < 2) throw Error("grid_patch: need at least 2 x 2 vertices");
  Mesh m;
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) m.vertices.push_back({static_cast<double>(x), static_cast<double>(y), 0.0});
  auto id = [nx](int x, int y) { return y * nx + x; };
  for (int y = 0; y + 1 < ny; ++y) {
    for (int x = 0; x + 1 < nx; ++x) {
      m.faces.push_back({id(x, y), id(x + 1, y), id(x + 1, y + 1)});
      m.faces.push_back({id(x, y), id(x + 1, y + 1), id(x, y + 1)});
    }
  }
  return m;
}

Mesh torus(int major_segments, int minor_segments, double major_radius, double minor_radius) {
  if (major_segments < 3 || minor_segments < 3) throw Error("torus: need at least 3 segments each way");
  Mesh m;
  for (int i = 0; i < major_segments; ++i) {
    const double u = 2 * std::numbers::pi * i / major_segments;
    for (int j = 0; j < minor_segments; ++j) {
      const double v = 2 * std::numbers::pi * j / minor_segments;
      const double r = major_radius + minor_radius * std::cos(v);
      m.vertices.push_back({r * std::cos(u), r * std::sin(u), minor_radius * std::sin(v)});
    }
  }
  auto id = [&](int i, int j) { return (i % major_segments) * minor_segments + (j % minor_segments); };
  for (int i = 0; i < major_segments; ++i) {
    for (int j = 0; j < minor_segments; ++j) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

GridDims grid_for_edges(std::size_t target_edges) {
  if (target_edges < 9) throw Error("grid_for_edges: target below 9 edges");
  const long n0 = std::lround(static_cast<double>(target_edges) / 3.0);
  GridDims best;
  double best_cost = 1e300;
  for (long delta = 0; delta <= n0; ++delta) {
    for (long n : {n0 - delta, n0 + delta}) {
      if (n < 3) continue;
      for (long rings = 1; rings * 3 <= n; ++rings) {
        if (n % rings) continue;
        const long seg = n / rings;
        const double cost = std::abs(std::log(static_cast<double>(seg) / (2.0 * rings))) +
                            0.2 * static_cast<double>(delta);
        if (cost < best_cost) {
          best_cost = cost;
          best = {static_cast<int>(seg), static_cast<int>(rings)};
        }
      }
    }
    if (best_cost < 0.2 * static_cast<double>(delta + 1)) break;
  }
  return best;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  double q[4];
  double len = 0;
  do {
    len = 0;
    for (auto& x : q) {
      x = n(rng);
      len += x * x;
    }
  } while (len < 1e-12);
  len = std::sqrt(len);
  const double w = q[0] / len, x = q[1] / len, y = q[2] / len, z = q[3] / len;
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
           {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
           {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
}

Mat3 rotation_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

Mat3 scale_matrix(double sx, double sy, double sz) { return {{{sx, 0, 0}, {0, sy, 0}, {0, 0, sz}}}; }

Mat3 multiply(const Mat3& a, const Mat3& b) {
  Mat3 out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) out[i][j] += a[i][k] * b[k][j];
  return out;
}

Mesh transform_mesh(const Mesh& mesh, const Mat3& linear, const Vec3& offset) {
  Mesh out = mesh;
  for (auto& p : out.vertices) {
    const Vec3 q = p;
    for (int i = 0; i < 3; ++i) p[i] = linear[i][0] * q[0] + linear[i][1] * q[1] + linear[i][2] * q[2] + offset[i];
  }
  return out;
}

double signed_volume6(const Mesh& mesh) {
  double v = 0;
  for (const auto& f : mesh.faces) {
    v += dot(mesh.vertices[f[0]], cross(mesh.vertices[f[1]], mesh.vertices[f[2]]));
  }
  return v;
}

}  // namespace meshnet
