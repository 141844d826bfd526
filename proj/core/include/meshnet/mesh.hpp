#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace meshnet {

using VertexId = std::int32_t;
using FaceId = std::int32_t;
using EdgeId = std::int32_t;

using Vec3 = std::array<double, 3>;
using Face = std::array<VertexId, 3>;

// Triangle soup with counter-clockwise faces. After loading, every vertex is
// referenced by some face, faces have three distinct in-range indices, and no
// face is repeated as an unordered triple.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  std::size_t vertex_count() const noexcept { return vertices.size(); }
  std::size_t face_count() const noexcept { return faces.size(); }
};

struct LoadReport {
  std::size_t isolated_vertices_dropped = 0;
};

Mesh parse_obj(std::istream& in, LoadReport* report = nullptr);
Mesh load_obj(const std::filesystem::path& path, LoadReport* report = nullptr);

// Checks the Mesh invariants, throwing TopologyError on the first violation.
void validate_mesh(const Mesh& mesh);

// Drops vertices no face references; keeps the relative order of the rest.
std::size_t remove_isolated_vertices(Mesh& mesh);

struct EdgeTopology;

// OBJ when `edge_labels` is empty, ASCII PLY with per-face colors otherwise.
// A face takes the majority label of its three edges (ties go to the lowest
// label id); colors cycle through a 16-entry palette.
void export_mesh(const Mesh& mesh, const EdgeTopology& topo,
                 std::optional<std::span<const int>> edge_labels,
                 const std::filesystem::path& path);

void write_obj(const Mesh& mesh, std::ostream& out);
void write_ply(const Mesh& mesh, const EdgeTopology& topo, std::span<const int> edge_labels,
               std::ostream& out);

std::array<std::uint8_t, 3> palette_color(int label);

// Majority label over the three edges of each face.
std::vector<int> face_labels_from_edges(const EdgeTopology& topo, std::span<const int> edge_labels);

}  // namespace meshnet
