#include "meshnet/topology.hpp"

#include <algorithm>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "meshnet/error.hpp"

namespace meshnet {
namespace {

std::uint64_t edge_key(VertexId a, VertexId b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

std::string edge_name(VertexId a, VertexId b) {
  return "(" + std::to_string(a) + ", " + std::to_string(b) + ")";
}

int position_in_face(const std::array<EdgeId, 3>& fe, EdgeId e) {
  for (int i = 0; i < 3; ++i)
    if (fe[i] == e) return i;
  return -1;
}

}  // namespace

std::size_t EdgeTopology::boundary_count() const noexcept {
  return static_cast<std::size_t>(std::count(boundary.begin(), boundary.end(), std::uint8_t{1}));
}

EdgeTopology build_edge_topology(const Mesh& mesh) {
  EdgeTopology topo;
  const auto nf = mesh.faces.size();
  topo.face_edges.resize(nf);
  std::unordered_map<std::uint64_t, EdgeId> lookup;
  lookup.reserve(nf * 2);

  for (std::size_t f = 0; f < nf; ++f) {
    const auto& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const VertexId a = face[k];
      const VertexId b = face[(k + 1) % 3];
      auto [it, inserted] = lookup.try_emplace(edge_key(a, b), static_cast<EdgeId>(topo.edges.size()));
      const EdgeId e = it->second;
      if (inserted) {
        topo.edges.push_back({a, b});
        topo.edge_faces.push_back({static_cast<FaceId>(f), kNoFace});
      } else {
        auto& ef = topo.edge_faces[e];
        if (ef[1] != kNoFace) {
          throw TopologyError("non-manifold edge " + edge_name(a, b) + ": more than two incident faces");
        }
        if (topo.edges[e][0] == a) {
          throw TopologyError("inconsistent winding on edge " + edge_name(a, b) + " (faces " +
                              std::to_string(ef[0]) + " and " + std::to_string(f) + ")");
        }
        ef[1] = static_cast<FaceId>(f);
      }
      topo.face_edges[f][k] = e;
    }
  }
  rebuild_neighbors(topo, mesh);
  return topo;
}

void rebuild_neighbors(EdgeTopology& topo, const Mesh& mesh) {
  const auto ne = topo.edges.size();
  const EdgeId none = topo.sentinel();
  topo.neighbors.assign(ne, {none, none, none, none});
  topo.boundary.assign(ne, 0);
  for (std::size_t e = 0; e < ne; ++e) {
    for (int side = 0; side < 2; ++side) {
      const FaceId f = topo.edge_faces[e][side];
      if (f == kNoFace) {
        topo.boundary[e] = 1;
        continue;
      }
      const auto& fe = topo.face_edges[static_cast<std::size_t>(f)];
      const int i = position_in_face(fe, static_cast<EdgeId>(e));
      topo.neighbors[e][2 * side] = fe[(i + 1) % 3];
      topo.neighbors[e][2 * side + 1] = fe[(i + 2) % 3];
    }
  }
  topo.vertex_ring.assign(mesh.vertices.size(), {});
  for (std::size_t e = 0; e < ne; ++e) {
    topo.vertex_ring[topo.edges[e][0]].push_back(static_cast<EdgeId>(e));
    topo.vertex_ring[topo.edges[e][1]].push_back(static_cast<EdgeId>(e));
  }
}

long euler_characteristic(const Mesh& mesh, const EdgeTopology& topo) {
  return static_cast<long>(mesh.vertices.size()) - static_cast<long>(topo.edge_count()) +
         static_cast<long>(mesh.faces.size());
}

std::vector<std::uint8_t> boundary_vertices(const EdgeTopology& topo) {
  std::vector<std::uint8_t> out(topo.vertex_ring.size(), 0);
  for (std::size_t e = 0; e < topo.edge_count(); ++e) {
    if (topo.boundary[e]) {
      out[topo.edges[e][0]] = 1;
      out[topo.edges[e][1]] = 1;
    }
  }
  return out;
}

void validate_topology(const Mesh& mesh, const EdgeTopology& topo) {
  validate_mesh(mesh);
  const auto ne = topo.edge_count();
  const auto nf = mesh.faces.size();
  const EdgeId none = topo.sentinel();
  auto fail = [](const std::string& msg) { throw TopologyError(msg); };

  if (topo.face_edges.size() != nf) fail("face_edges size does not match face count");
  if (topo.edge_faces.size() != ne || topo.neighbors.size() != ne || topo.boundary.size() != ne) {
    fail("per-edge arrays disagree in length");
  }
  if (topo.vertex_ring.size() != mesh.vertices.size()) fail("vertex_ring size mismatch");

  std::unordered_set<std::uint64_t> keys;
  for (std::size_t e = 0; e < ne; ++e) {
    const auto [a, b] = topo.edges[e];
    if (a == b) fail("edge " + std::to_string(e) + " is a loop");
    if (!keys.insert(edge_key(a, b)).second) fail("duplicate edge " + edge_name(a, b));
  }

  // Every face's edges must match its vertices, in half-edge order.
  std::vector<int> incidence(ne, 0);
  for (std::size_t f = 0; f < nf; ++f) {
    const auto& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const EdgeId e = topo.face_edges[f][k];
      if (e < 0 || e >= none) fail("face " + std::to_string(f) + " references a missing edge");
      const auto [a, b] = topo.edges[e];
      if (edge_key(a, b) != edge_key(face[k], face[(k + 1) % 3])) {
        fail("face " + std::to_string(f) + " edge slot " + std::to_string(k) + " mismatch");
      }
      const auto& ef = topo.edge_faces[e];
      if (ef[0] != static_cast<FaceId>(f) && ef[1] != static_cast<FaceId>(f)) {
        fail("edge " + std::to_string(e) + " does not list incident face " + std::to_string(f));
      }
      ++incidence[e];
    }
  }

  for (std::size_t e = 0; e < ne; ++e) {
    const auto& ef = topo.edge_faces[e];
    const int expected = ef[1] == kNoFace ? 1 : 2;
    if (ef[0] == kNoFace) fail("edge " + std::to_string(e) + " has no faces");
    if (incidence[e] != expected) {
      fail("edge " + std::to_string(e) + " incidence " + std::to_string(incidence[e]) +
           " disagrees with edge_faces");
    }
    if (static_cast<bool>(topo.boundary[e]) != (ef[1] == kNoFace)) {
      fail("edge " + std::to_string(e) + " boundary flag wrong");
    }
    // edges[e] follows the traversal direction of the first face; the second
    // face must traverse it the other way.
    const auto [a, b] = topo.edges[e];
    for (int side = 0; side < expected; ++side) {
      const auto& face = mesh.faces[static_cast<std::size_t>(ef[side])];
      bool forward = false;
      for (int k = 0; k < 3; ++k)
        if (face[k] == a && face[(k + 1) % 3] == b) forward = true;
      if (forward != (side == 0)) fail("edge " + std::to_string(e) + " winding/orientation inconsistent");
    }

    const auto& nb = topo.neighbors[e];
    int real = 0;
    for (int j = 0; j < 4; ++j) {
      if (nb[j] == none) continue;
      ++real;
      if (nb[j] < 0 || nb[j] > none) fail("edge " + std::to_string(e) + " neighbor out of range");
      const auto [c, d] = topo.edges[nb[j]];
      const int shared = (c == a) + (c == b) + (d == a) + (d == b);
      if (shared != 1) fail("edge " + std::to_string(e) + " neighbor does not share exactly one vertex");
      const auto& back = topo.neighbors[nb[j]];
      if (std::find(back.begin(), back.end(), static_cast<EdgeId>(e)) == back.end()) {
        fail("neighbor relation of edge " + std::to_string(e) + " is not symmetric");
      }
    }
    if (real != 2 * expected) fail("edge " + std::to_string(e) + " has wrong neighbor count");
    if (expected == 2) {
      std::array<EdgeId, 4> sorted = nb;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        fail("interior edge " + std::to_string(e) + " has repeated neighbors");
      }
    }
    for (int side = 0; side < expected; ++side) {
      const auto& fe = topo.face_edges[static_cast<std::size_t>(ef[side])];
      const int i = position_in_face(fe, static_cast<EdgeId>(e));
      if (nb[2 * side] != fe[(i + 1) % 3] || nb[2 * side + 1] != fe[(i + 2) % 3]) {
        fail("edge " + std::to_string(e) + " neighbor order violates the face convention");
      }
    }
  }

  for (std::size_t v = 0; v < topo.vertex_ring.size(); ++v) {
    for (auto e : topo.vertex_ring[v]) {
      if (topo.edges[e][0] != static_cast<VertexId>(v) && topo.edges[e][1] != static_cast<VertexId>(v)) {
        fail("vertex_ring of " + std::to_string(v) + " lists a non-incident edge");
      }
    }
  }
}

}  // namespace meshnet
