#include "meshnet/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>

#include "meshnet/error.hpp"
#include "meshnet/topology.hpp"

namespace meshnet {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view tok, std::size_t line_no) {
  // from_chars for double is available in libstdc++ 11
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError("malformed number '" + std::string(tok) + "'", line_no);
  }
  return v;
}

// Accepts "i", "i/t", "i//n", "i/t/n"; negative indices are relative to the
// vertices read so far.
VertexId parse_face_index(std::string_view tok, std::size_t vertices_so_far, std::size_t line_no) {
  const auto slash = tok.find('/');
  const auto idx_tok = tok.substr(0, slash);
  long idx = 0;
  auto [ptr, ec] = std::from_chars(idx_tok.data(), idx_tok.data() + idx_tok.size(), idx);
  if (ec != std::errc{} || ptr != idx_tok.data() + idx_tok.size() || idx == 0) {
    throw ParseError("malformed face index '" + std::string(tok) + "'", line_no);
  }
  long zero_based = idx > 0 ? idx - 1 : static_cast<long>(vertices_so_far) + idx;
  if (zero_based < 0 || zero_based >= static_cast<long>(vertices_so_far)) {
    throw ParseError("face index " + std::to_string(idx) + " out of range", line_no);
  }
  return static_cast<VertexId>(zero_based);
}

struct FaceKey {
  std::array<VertexId, 3> v;
  bool operator==(const FaceKey&) const = default;
};

struct FaceKeyHash {
  std::size_t operator()(const FaceKey& k) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (auto x : k.v) h = (h ^ static_cast<std::size_t>(x)) * 1099511628211ull;
    return h;
  }
};

FaceKey sorted_key(const Face& f) {
  FaceKey k{f};
  std::sort(k.v.begin(), k.v.end());
  return k;
}

constexpr std::array<std::array<std::uint8_t, 3>, 16> kPalette{{
    {230, 25, 75},  {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
    {245, 130, 48}, {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
    {210, 245, 60}, {250, 190, 212}, {0, 128, 128},  {220, 190, 255},
    {170, 110, 40}, {255, 250, 200}, {128, 0, 0},    {170, 255, 195},
}};

}  // namespace

Mesh parse_obj(std::istream& in, LoadReport* report) {
  Mesh mesh;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    const auto toks = split_ws(view);
    if (toks.empty()) continue;
    if (toks[0] == "v") {
      if (toks.size() < 4 || toks.size() > 5) {
        throw ParseError("vertex record needs 3 coordinates", line_no);
      }
      mesh.vertices.push_back({parse_double(toks[1], line_no), parse_double(toks[2], line_no),
                               parse_double(toks[3], line_no)});
    } else if (toks[0] == "f") {
      if (toks.size() < 4) throw ParseError("face record needs 3 indices", line_no);
      if (toks.size() > 4) throw ParseError("non-triangular face", line_no);
      Face f{};
      for (int k = 0; k < 3; ++k) {
        f[k] = parse_face_index(toks[k + 1], mesh.vertices.size(), line_no);
      }
      if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
        throw ParseError("face repeats a vertex", line_no);
      }
      mesh.faces.push_back(f);
    }
    // vt, vn, o, g, s, usemtl, mtllib, l ... are ignored.
  }
  if (mesh.faces.empty()) throw ParseError("OBJ contains no faces");

  std::unordered_set<FaceKey, FaceKeyHash> seen;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    if (!seen.insert(sorted_key(mesh.faces[i])).second) {
      throw ParseError("duplicate face " + std::to_string(i));
    }
  }
  const auto dropped = remove_isolated_vertices(mesh);
  if (report) report->isolated_vertices_dropped = dropped;
  return mesh;
}

Mesh load_obj(const std::filesystem::path& path, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return parse_obj(in, report);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::size_t remove_isolated_vertices(Mesh& mesh) {
  std::vector<VertexId> remap(mesh.vertices.size(), -1);
  for (const auto& f : mesh.faces)
    for (auto v : f) remap[v] = 0;
  VertexId next = 0;
  std::vector<Vec3> kept;
  kept.reserve(mesh.vertices.size());
  for (std::size_t i = 0; i < remap.size(); ++i) {
    if (remap[i] < 0) continue;
    remap[i] = next++;
    kept.push_back(mesh.vertices[i]);
  }
  const std::size_t dropped = mesh.vertices.size() - kept.size();
  if (dropped == 0) return 0;
  for (auto& f : mesh.faces)
    for (auto& v : f) v = remap[v];
  mesh.vertices = std::move(kept);
  return dropped;
}

void validate_mesh(const Mesh& mesh) {
  const auto nv = static_cast<VertexId>(mesh.vertices.size());
  std::vector<std::uint8_t> used(mesh.vertices.size(), 0);
  std::unordered_set<FaceKey, FaceKeyHash> seen;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    for (auto v : f) {
      if (v < 0 || v >= nv) throw TopologyError("face " + std::to_string(i) + " index out of range");
      used[v] = 1;
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
      throw TopologyError("face " + std::to_string(i) + " repeats a vertex");
    }
    if (!seen.insert(sorted_key(f)).second) {
      throw TopologyError("duplicate face " + std::to_string(i));
    }
  }
  for (std::size_t v = 0; v < used.size(); ++v) {
    if (!used[v]) throw TopologyError("vertex " + std::to_string(v) + " is isolated");
  }
}

std::array<std::uint8_t, 3> palette_color(int label) {
  const auto n = static_cast<int>(kPalette.size());
  return kPalette[static_cast<std::size_t>(((label % n) + n) % n)];
}

std::vector<int> face_labels_from_edges(const EdgeTopology& topo, std::span<const int> edge_labels) {
  std::vector<int> out(topo.face_count(), 0);
  for (std::size_t f = 0; f < topo.face_count(); ++f) {
    std::map<int, int> votes;
    for (auto e : topo.face_edges[f]) ++votes[edge_labels[static_cast<std::size_t>(e)]];
    int best = 0, best_count = -1;
    for (auto [label, count] : votes) {  // ascending label: ties keep the lowest
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    }
    out[f] = best;
  }
  return out;
}

void write_obj(const Mesh& mesh, std::ostream& out) {
  char buf[128];
  for (const auto& p : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.9g %.9g %.9g\n", p[0], p[1], p[2]);
    out << buf;
  }
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
}

void write_ply(const Mesh& mesh, const EdgeTopology& topo, std::span<const int> edge_labels,
               std::ostream& out) {
  const auto face_labels = face_labels_from_edges(topo, edge_labels);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << mesh.vertices.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "element face " << mesh.faces.size() << "\n";
  out << "property list uchar int vertex_indices\n";
  out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out << "end_header\n";
  char buf[128];
  for (const auto& p : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", p[0], p[1], p[2]);
    out << buf;
  }
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const auto& f = mesh.faces[i];
    const auto c = palette_color(face_labels[i]);
    out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << ' ' << int(c[0]) << ' ' << int(c[1])
        << ' ' << int(c[2]) << '\n';
  }
}

void export_mesh(const Mesh& mesh, const EdgeTopology& topo,
                 std::optional<std::span<const int>> edge_labels,
                 const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  if (edge_labels) {
    if (edge_labels->size() != topo.edge_count()) {
      throw ShapeError("export_mesh: " + std::to_string(edge_labels->size()) + " labels for " +
                       std::to_string(topo.edge_count()) + " edges");
    }
    write_ply(mesh, topo, *edge_labels, out);
  } else {
    write_obj(mesh, out);
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace meshnet
