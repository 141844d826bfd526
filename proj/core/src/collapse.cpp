#include "meshnet/collapse.hpp"

#include <algorithm>
#include <string>

#include "meshnet/error.hpp"

namespace meshnet {
namespace {

int slot_of(const std::array<EdgeId, 3>& fe, EdgeId e) {
  for (int i = 0; i < 3; ++i)
    if (fe[i] == e) return i;
  return -1;
}

int slot_of_vertex(const Face& f, VertexId v) {
  for (int i = 0; i < 3; ++i)
    if (f[i] == v) return i;
  return -1;
}

VertexId other_end(const std::array<VertexId, 2>& ev, VertexId v) { return ev[0] == v ? ev[1] : ev[0]; }

void erase_value(std::vector<EdgeId>& v, EdgeId x) { v.erase(std::remove(v.begin(), v.end(), x), v.end()); }

std::array<VertexId, 3> sorted_face(Face f) {
  std::sort(f.begin(), f.end());
  return f;
}

}  // namespace

EdgeCollapser::EdgeCollapser(const Mesh& mesh, const EdgeTopology& topo)
    : positions_(mesh.vertices),
      faces_(mesh.faces),
      face_edges_(topo.face_edges),
      edges_(topo.edges),
      edge_faces_(topo.edge_faces),
      vertex_edges_(topo.vertex_ring),
      vertex_alive_(mesh.vertices.size(), 1),
      face_alive_(mesh.faces.size(), 1),
      edge_alive_(topo.edges.size(), 1),
      live_vertices_(mesh.vertices.size()),
      live_faces_(mesh.faces.size()),
      live_edges_(topo.edges.size()) {}

bool EdgeCollapser::is_boundary_vertex(VertexId v) const {
  for (auto e : vertex_edges_[static_cast<std::size_t>(v)])
    if (edge_faces_[static_cast<std::size_t>(e)][1] == kNoFace) return true;
  return false;
}

bool EdgeCollapser::is_valid(EdgeId e) const {
  const auto ei = static_cast<std::size_t>(e);
  if (e < 0 || ei >= edges_.size() || !edge_alive_[ei]) return false;
  const auto& ef = edge_faces_[ei];
  if (ef[1] == kNoFace) return false;
  const VertexId u = edges_[ei][0];
  const VertexId v = edges_[ei][1];
  if (is_boundary_vertex(u) && is_boundary_vertex(v)) return false;

  // One-ring intersection must be exactly the two opposite vertices.
  std::vector<VertexId> ring_u, ring_v;
  for (auto x : vertex_edges_[static_cast<std::size_t>(u)]) ring_u.push_back(other_end(edges_[static_cast<std::size_t>(x)], u));
  for (auto x : vertex_edges_[static_cast<std::size_t>(v)]) ring_v.push_back(other_end(edges_[static_cast<std::size_t>(x)], v));
  std::sort(ring_u.begin(), ring_u.end());
  std::sort(ring_v.begin(), ring_v.end());
  std::vector<VertexId> shared;
  std::set_intersection(ring_u.begin(), ring_u.end(), ring_v.begin(), ring_v.end(), std::back_inserter(shared));
  if (shared.size() != 2) return false;

  // Faces around v (other than the two that vanish) are re-targeted to u;
  // none may lose a vertex or duplicate a face already around u.
  std::vector<std::array<VertexId, 3>> around_u;
  for (auto x : vertex_edges_[static_cast<std::size_t>(u)]) {
    for (auto f : edge_faces_[static_cast<std::size_t>(x)]) {
      if (f == kNoFace || f == ef[0] || f == ef[1]) continue;
      around_u.push_back(sorted_face(faces_[static_cast<std::size_t>(f)]));
    }
  }
  std::sort(around_u.begin(), around_u.end());
  for (auto x : vertex_edges_[static_cast<std::size_t>(v)]) {
    for (auto f : edge_faces_[static_cast<std::size_t>(x)]) {
      if (f == kNoFace || f == ef[0] || f == ef[1]) continue;
      Face moved = faces_[static_cast<std::size_t>(f)];
      for (auto& w : moved)
        if (w == v) w = u;
      if (moved[0] == moved[1] || moved[1] == moved[2] || moved[0] == moved[2]) return false;
      if (std::binary_search(around_u.begin(), around_u.end(), sorted_face(moved))) return false;
    }
  }
  return true;
}

void EdgeCollapser::orient_from_first_face(EdgeId e) {
  auto& ef = edge_faces_[static_cast<std::size_t>(e)];
  if (ef[0] == kNoFace) std::swap(ef[0], ef[1]);
  const auto& face = faces_[static_cast<std::size_t>(ef[0])];
  const int k = slot_of(face_edges_[static_cast<std::size_t>(ef[0])], e);
  edges_[static_cast<std::size_t>(e)] = {face[k], face[(k + 1) % 3]};
}

CollapseRecord EdgeCollapser::collapse(EdgeId e) {
  if (!is_valid(e)) throw TopologyError("invalid collapse of edge " + std::to_string(e));
  const auto ei = static_cast<std::size_t>(e);
  const FaceId f1 = edge_faces_[ei][0];
  const FaceId f2 = edge_faces_[ei][1];
  const auto& fe1 = face_edges_[static_cast<std::size_t>(f1)];
  const auto& fe2 = face_edges_[static_cast<std::size_t>(f2)];
  const int i = slot_of(fe1, e);
  const int j = slot_of(fe2, e);
  const VertexId u = faces_[static_cast<std::size_t>(f1)][i];
  const VertexId v = faces_[static_cast<std::size_t>(f1)][(i + 1) % 3];
  const VertexId w1 = faces_[static_cast<std::size_t>(f1)][(i + 2) % 3];
  const VertexId w2 = faces_[static_cast<std::size_t>(f2)][(j + 2) % 3];
  const EdgeId a = fe1[(i + 1) % 3], b = fe1[(i + 2) % 3];
  const EdgeId c = fe2[(j + 1) % 3], d = fe2[(j + 2) % 3];

  CollapseRecord rec;
  rec.edge = e;
  rec.side1 = {a, b, e};
  rec.side2 = {c, d, e};
  rec.p = a;
  rec.q = c;
  rec.removed = {e, b, d};
  rec.kept_vertex = u;
  rec.removed_vertex = v;

  auto other_face = [&](EdgeId x, FaceId not_this) {
    const auto& xf = edge_faces_[static_cast<std::size_t>(x)];
    return xf[0] == not_this ? xf[1] : xf[0];
  };
  const FaceId fb = other_face(b, f1);
  const FaceId fd = other_face(d, f2);

  // Faces that will see v replaced by u.
  std::vector<FaceId> v_faces;
  for (auto x : vertex_edges_[static_cast<std::size_t>(v)])
    for (auto f : edge_faces_[static_cast<std::size_t>(x)])
      if (f != kNoFace && f != f1 && f != f2) v_faces.push_back(f);
  std::sort(v_faces.begin(), v_faces.end());
  v_faces.erase(std::unique(v_faces.begin(), v_faces.end()), v_faces.end());

  // b's other face now uses a; d's other face now uses c.
  if (fb != kNoFace) {
    auto& fe = face_edges_[static_cast<std::size_t>(fb)];
    fe[slot_of(fe, b)] = a;
  }
  if (fd != kNoFace) {
    auto& fe = face_edges_[static_cast<std::size_t>(fd)];
    fe[slot_of(fe, d)] = c;
  }
  for (auto& f : edge_faces_[static_cast<std::size_t>(a)])
    if (f == f1) f = fb;
  for (auto& f : edge_faces_[static_cast<std::size_t>(c)])
    if (f == f2) f = fd;

  for (auto f : v_faces) {
    auto& face = faces_[static_cast<std::size_t>(f)];
    face[slot_of_vertex(face, v)] = u;
  }

  face_alive_[static_cast<std::size_t>(f1)] = 0;
  face_alive_[static_cast<std::size_t>(f2)] = 0;
  for (auto x : {e, b, d}) edge_alive_[static_cast<std::size_t>(x)] = 0;
  vertex_alive_[static_cast<std::size_t>(v)] = 0;
  live_faces_ -= 2;
  live_edges_ -= 3;
  live_vertices_ -= 1;

  // Rewire v's surviving edges to u.
  auto& ring_u = vertex_edges_[static_cast<std::size_t>(u)];
  erase_value(ring_u, e);
  erase_value(ring_u, b);
  for (auto x : vertex_edges_[static_cast<std::size_t>(v)]) {
    if (x == e || x == d) continue;
    auto& ev = edges_[static_cast<std::size_t>(x)];
    if (ev[0] == v) ev[0] = u;
    if (ev[1] == v) ev[1] = u;
    ring_u.push_back(x);
  }
  vertex_edges_[static_cast<std::size_t>(v)].clear();
  erase_value(vertex_edges_[static_cast<std::size_t>(w1)], b);
  erase_value(vertex_edges_[static_cast<std::size_t>(w2)], d);

  orient_from_first_face(a);
  orient_from_first_face(c);

  auto& pu = positions_[static_cast<std::size_t>(u)];
  const auto& pv = positions_[static_cast<std::size_t>(v)];
  for (int k = 0; k < 3; ++k) pu[k] = (pu[k] + pv[k]) / 2.0;
  return rec;
}

CompactedMesh EdgeCollapser::compact() const {
  CompactedMesh out;
  std::vector<VertexId> vmap(positions_.size(), -1);
  for (std::size_t v = 0; v < positions_.size(); ++v) {
    if (!vertex_alive_[v]) continue;
    vmap[v] = static_cast<VertexId>(out.mesh.vertices.size());
    out.mesh.vertices.push_back(positions_[v]);
  }
  std::vector<FaceId> fmap(faces_.size(), kNoFace);
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    if (!face_alive_[f]) continue;
    fmap[f] = static_cast<FaceId>(out.mesh.faces.size());
    const auto& face = faces_[f];
    out.mesh.faces.push_back({vmap[face[0]], vmap[face[1]], vmap[face[2]]});
  }
  std::vector<EdgeId> emap(edges_.size(), -1);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    if (!edge_alive_[e]) continue;
    emap[e] = static_cast<EdgeId>(out.kept_edges.size());
    out.kept_edges.push_back(static_cast<EdgeId>(e));
  }
  auto& topo = out.topo;
  topo.edges.reserve(out.kept_edges.size());
  topo.edge_faces.reserve(out.kept_edges.size());
  for (auto old : out.kept_edges) {
    const auto& ev = edges_[static_cast<std::size_t>(old)];
    const auto& ef = edge_faces_[static_cast<std::size_t>(old)];
    topo.edges.push_back({vmap[ev[0]], vmap[ev[1]]});
    topo.edge_faces.push_back({fmap[ef[0]], ef[1] == kNoFace ? kNoFace : fmap[ef[1]]});
  }
  topo.face_edges.reserve(out.mesh.faces.size());
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    if (!face_alive_[f]) continue;
    const auto& fe = face_edges_[f];
    topo.face_edges.push_back({emap[fe[0]], emap[fe[1]], emap[fe[2]]});
  }
  rebuild_neighbors(topo, out.mesh);
  return out;
}

bool is_valid_collapse(const Mesh& mesh, const EdgeTopology& topo, EdgeId e) {
  return EdgeCollapser(mesh, topo).is_valid(e);
}

}  // namespace meshnet
