#include "meshnet/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include "meshnet/collapse.hpp"
#include "meshnet/error.hpp"
#include "meshnet/features.hpp"

namespace meshnet {
namespace {

constexpr double kMinScale = 0.05;

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 face_normal(const Vec3& a, const Vec3& b, const Vec3& c) { return cross(sub(b, a), sub(c, a)); }

bool sound_face(const Vec3& n, const Vec3& reference) {
  return 0.5 * std::sqrt(dot(n, n)) > kDegenerateArea && dot(n, reference) > 0;
}

std::uint64_t key(VertexId a, VertexId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

// Face incidence by undirected edge, updated as flips happen.
class FlipState {
 public:
  FlipState(Mesh& mesh, const EdgeTopology& topo) : mesh_(mesh) {
    for (std::size_t e = 0; e < topo.edge_count(); ++e) {
      map_.emplace(key(topo.edges[e][0], topo.edges[e][1]), topo.edge_faces[e]);
    }
  }

  bool flip(VertexId a, VertexId b) {
    auto it = map_.find(key(a, b));
    if (it == map_.end()) return false;
    const auto [f1, f2] = it->second;
    if (f2 == kNoFace) return false;
    auto& F1 = mesh_.faces[static_cast<std::size_t>(f1)];
    auto& F2 = mesh_.faces[static_cast<std::size_t>(f2)];
    // Rotate F1 so that it reads (u, v, w1).
    int i = 0;
    while (!((F1[i] == a && F1[(i + 1) % 3] == b) || (F1[i] == b && F1[(i + 1) % 3] == a))) ++i;
    const VertexId u = F1[i], v = F1[(i + 1) % 3], w1 = F1[(i + 2) % 3];
    VertexId w2 = -1;
    for (auto x : F2)
      if (x != u && x != v) w2 = x;
    if (w2 < 0 || w1 == w2 || map_.count(key(w1, w2))) return false;

    const auto& P = mesh_.vertices;
    const Vec3 n1 = face_normal(P[u], P[v], P[w1]);
    const Vec3 n2 = face_normal(P[v], P[u], P[w2]);
    const Vec3 ref{n1[0] + n2[0], n1[1] + n2[1], n1[2] + n2[2]};
    const Vec3 na = face_normal(P[w1], P[u], P[w2]);
    const Vec3 nb = face_normal(P[w2], P[v], P[w1]);
    if (!sound_face(na, ref) || !sound_face(nb, ref) || dot(na, nb) <= 0) return false;

    F1 = {w1, u, w2};
    F2 = {w2, v, w1};
    map_.erase(it);
    map_.emplace(key(w1, w2), std::array<FaceId, 2>{f1, f2});
    auto retarget = [&](VertexId x, VertexId y, FaceId from, FaceId to) {
      for (auto& f : map_.at(key(x, y)))
        if (f == from) f = to;
    };
    retarget(u, w2, f2, f1);
    retarget(v, w1, f1, f2);
    return true;
  }

 private:
  Mesh& mesh_;
  std::unordered_map<std::uint64_t, std::array<FaceId, 2>> map_;
};

std::size_t fraction_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace

void validate(const AugmentParams& p) {
  if (!(p.aniso_sigma >= 0)) throw ConfigError("aniso_sigma must be >= 0");
  for (double f : {p.slide_fraction, p.flip_fraction, p.collapse_fraction}) {
    if (!(f >= 0 && f <= 1)) throw ConfigError("augmentation fractions must lie in [0, 1]");
  }
}

bool flip_edge(Mesh& mesh, const EdgeTopology& topo, EdgeId edge) {
  const auto& ev = topo.edges.at(static_cast<std::size_t>(edge));
  FlipState state(mesh, topo);
  return state.flip(ev[0], ev[1]);
}

Augmented augment(const Mesh& mesh, const EdgeTopology& topo, const AugmentParams& params) {
  validate(params);
  std::mt19937_64 rng(params.seed);
  Augmented out;
  out.mesh = mesh;
  auto& P = out.mesh.vertices;

  if (params.aniso_sigma > 0) {
    std::normal_distribution<double> n(1.0, params.aniso_sigma);
    std::array<double, 3> s{};
    for (auto& x : s) x = std::max(kMinScale, n(rng));
    for (auto& p : P)
      for (int k = 0; k < 3; ++k) p[k] *= s[k];
  }

  const std::size_t V = P.size();
  const std::size_t slides = fraction_count(params.slide_fraction, V);
  if (slides > 0) {
    std::vector<VertexId> order(V);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_real_distribution<double> amount(0.2, 0.5);
    for (std::size_t k = 0; k < slides; ++k) {
      const VertexId v = order[k];
      const auto& ring = topo.vertex_ring[static_cast<std::size_t>(v)];
      if (ring.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, ring.size() - 1);
      const auto& ev = topo.edges[static_cast<std::size_t>(ring[pick(rng)])];
      const VertexId w = ev[0] == v ? ev[1] : ev[0];
      const double t = amount(rng);
      const Vec3 old = P[v];
      std::vector<Vec3> before;
      std::vector<FaceId> faces;
      for (auto e : ring)
        for (auto f : topo.edge_faces[static_cast<std::size_t>(e)])
          if (f != kNoFace) faces.push_back(f);
      std::sort(faces.begin(), faces.end());
      faces.erase(std::unique(faces.begin(), faces.end()), faces.end());
      for (auto f : faces) {
        const auto& F = out.mesh.faces[static_cast<std::size_t>(f)];
        before.push_back(face_normal(P[F[0]], P[F[1]], P[F[2]]));
      }
      for (int c = 0; c < 3; ++c) P[v][c] = old[c] + t * (P[w][c] - old[c]);
      bool ok = true;
      for (std::size_t i = 0; i < faces.size() && ok; ++i) {
        const auto& F = out.mesh.faces[static_cast<std::size_t>(faces[i])];
        ok = sound_face(face_normal(P[F[0]], P[F[1]], P[F[2]]), before[i]);
      }
      if (ok) {
        ++out.report.slides_applied;
      } else {
        P[v] = old;
        ++out.report.slides_skipped;
      }
    }
  }

  const bool topology_changes = params.flip_fraction > 0 || params.collapse_fraction > 0;
  if (params.flip_fraction > 0) {
    std::vector<EdgeId> interior;
    for (std::size_t e = 0; e < topo.edge_count(); ++e)
      if (!topo.boundary[e]) interior.push_back(static_cast<EdgeId>(e));
    std::shuffle(interior.begin(), interior.end(), rng);
    const std::size_t flips = std::min(interior.size(), fraction_count(params.flip_fraction, interior.size()));
    FlipState state(out.mesh, topo);
    for (std::size_t k = 0; k < flips; ++k) {
      const auto& ev = topo.edges[static_cast<std::size_t>(interior[k])];
      if (state.flip(ev[0], ev[1])) {
        ++out.report.flips_applied;
      } else {
        ++out.report.flips_skipped;
      }
    }
  }

  if (params.collapse_fraction > 0) {
    EdgeTopology current = build_edge_topology(out.mesh);
    std::vector<EdgeId> order(current.edge_count());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t want = fraction_count(params.collapse_fraction, order.size());
    EdgeCollapser collapser(out.mesh, current);
    for (auto e : order) {
      if (out.report.collapses_applied >= want) break;
      if (!collapser.alive(e)) continue;
      if (collapser.is_valid(e)) {
        collapser.collapse(e);
        ++out.report.collapses_applied;
      } else {
        ++out.report.collapses_skipped;
      }
    }
    out.mesh = collapser.compact().mesh;
  }

  out.topo = topology_changes ? build_edge_topology(out.mesh) : topo;
  return out;
}

}  // namespace meshnet
