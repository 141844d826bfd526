#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "meshnet/mesh.hpp"

namespace meshnet {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mesh tetrahedron();
Mesh octahedron();
Mesh icosahedron();
// Loop-style midpoint subdivision of the icosahedron projected to the unit
// sphere: 30 * 4^level edges.
Mesh icosphere(int level);

// Latitude/longitude sphere: `segments` vertices per ring, `rings` rings
// between two poles. E = 3 * segments * rings, V = segments * rings + 2.
Mesh uv_sphere(int segments, int rings);

// Revolves a (radius, height) profile around z. The profile runs from the
// bottom pole to the top pole (first and last radius 0) and is resampled at
// `rings` interior points uniform in arc length. `cross_exponent` shapes the
// cross-section as a superellipse (2 = circle, large = square).
// `ring_param` receives the arc-length fraction of each ring.
Mesh revolve(const std::vector<std::array<double, 2>>& profile, int segments, int rings,
             double cross_exponent = 2.0, std::vector<double>* ring_param = nullptr);

// Flat nx x ny vertex grid in the xy-plane; has a boundary.
Mesh grid_patch(int nx, int ny);

// Closed genus-1 surface, χ = 0.
Mesh torus(int major_segments, int minor_segments, double major_radius = 1.0, double minor_radius = 0.35);

struct GridDims {
  int segments = 0;
  int rings = 0;
};
// Grid for uv_sphere/revolve whose 3 * segments * rings is closest to
// target_edges, preferring about two segments per ring.
GridDims grid_for_edges(std::size_t target_edges);

Mat3 random_rotation(std::mt19937_64& rng);
Mat3 rotation_z(double angle);
// p -> linear * p + offset for every vertex.
Mesh transform_mesh(const Mesh& mesh, const Mat3& linear, const Vec3& offset = {0, 0, 0});
Mat3 scale_matrix(double sx, double sy, double sz);
Mat3 multiply(const Mat3& a, const Mat3& b);

// Six times the enclosed volume; positive for outward-facing closed meshes.
double signed_volume6(const Mesh& mesh);

}  // namespace meshnet
