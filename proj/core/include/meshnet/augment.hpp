#pragma once

#include <cstdint>

#include "meshnet/mesh.hpp"
#include "meshnet/topology.hpp"

namespace meshnet {

struct AugmentParams {
  double aniso_sigma = 0.1;
  double slide_fraction = 0.2;
  double flip_fraction = 0.05;
  double collapse_fraction = 0.0;
  std::uint64_t seed = 0;

  bool operator==(const AugmentParams&) const = default;
};

// Throws ConfigError for a negative sigma or a fraction outside [0, 1].
void validate(const AugmentParams& params);

struct AugmentReport {
  std::size_t slides_applied = 0;
  std::size_t slides_skipped = 0;
  std::size_t flips_applied = 0;
  std::size_t flips_skipped = 0;
  std::size_t collapses_applied = 0;
  std::size_t collapses_skipped = 0;
};

struct Augmented {
  Mesh mesh;
  EdgeTopology topo;
  AugmentReport report;
};

// In order: per-axis scale by factors drawn from N(1, sigma); slide a
// fraction of vertices toward a random 1-ring neighbour by U(0.2, 0.5) of
// the chord; flip a fraction of interior edges; collapse a fraction of
// edges. Moves and flips that would fold or degenerate a face, duplicate an
// edge, or break the manifold are skipped.
Augmented augment(const Mesh& mesh, const EdgeTopology& topo, const AugmentParams& params);

// Replaces the shared edge of the two faces around `edge` by the other
// diagonal. Returns false (mesh untouched) when the flip is not allowed.
bool flip_edge(Mesh& mesh, const EdgeTopology& topo, EdgeId edge);

}  // namespace meshnet
