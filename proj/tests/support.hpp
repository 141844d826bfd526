#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "meshnet/autodiff.hpp"
#include "meshnet/mesh.hpp"
#include "meshnet/topology.hpp"

namespace meshnet::testing {

// Closed genus-0 mesh with jittered vertices: a random synthetic shape,
// uv sphere or subdivided icosahedron, roughly `edges` edges.
Mesh random_closed_mesh(std::mt19937_64& rng, std::size_t edges = 300);

// Same surface with faces shuffled and each face's vertex order rotated.
Mesh shuffle_faces(const Mesh& mesh, std::mt19937_64& rng);

Tensor<double> random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1, double hi = 1);

// Builds loss = <f(inputs), w> for a fixed random w and compares the tape
// gradient of every input with central differences. Returns the worst
// relative error max|g - fd| / max(1, max|fd|) per input.
using GraphFn = std::function<Var(Tape<double>&, const std::vector<Var>&)>;
double max_gradient_error(const GraphFn& f, std::vector<Tensor<double>> inputs, std::uint64_t seed = 7,
                          double h = 1e-6);

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

std::string read_file(const std::filesystem::path& path);

}  // namespace meshnet::testing
