#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "meshnet/primitives.hpp"
#include "meshnet/synthetic.hpp"

namespace meshnet::testing {

Mesh random_closed_mesh(std::mt19937_64& rng, std::size_t edges) {
  std::uniform_int_distribution<int> kind(0, 7);
  const int k = kind(rng);
  Mesh m;
  if (k < 6) {
    m = make_class_shape(static_cast<std::size_t>(k), edges, rng).mesh;
  } else if (k == 6) {
    const auto g = grid_for_edges(edges);
    m = transform_mesh(uv_sphere(g.segments, g.rings), random_rotation(rng));
  } else {
    m = icosphere(edges > 400 ? 2 : 1);
  }
  std::normal_distribution<double> n(0.0, 0.005);
  for (auto& p : m.vertices)
    for (auto& x : p) x += n(rng);
  return m;
}

Mesh shuffle_faces(const Mesh& mesh, std::mt19937_64& rng) {
  Mesh out = mesh;
  std::shuffle(out.faces.begin(), out.faces.end(), rng);
  std::uniform_int_distribution<int> rot(0, 2);
  for (auto& f : out.faces) std::rotate(f.begin(), f.begin() + rot(rng), f.end());
  return out;
}

Tensor<double> random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo, double hi) {
  Tensor<double> t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

namespace {

double weighted_loss(const GraphFn& f, const std::vector<Tensor<double>>& inputs, Tensor<double>* weights,
                     std::uint64_t seed, std::vector<Tensor<double>>* grads) {
  Tape<double> tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  const Var out = f(tape, vars);
  const auto& value = tape.value(out);
  if (weights->empty()) {
    std::mt19937_64 rng(seed);
    *weights = random_tensor({1, value.size()}, rng);
  }
  const Var flat = ad::reshape(tape, out, {value.size(), 1});
  const Var w = tape.constant(*weights);
  const Var loss = ad::matmul(tape, w, flat);
  const double l = tape.value(loss)[0];
  if (grads) {
    tape.backward(loss);
    grads->clear();
    for (auto v : vars) grads->push_back(tape.grad(v));
  }
  return l;
}

}  // namespace

double max_gradient_error(const GraphFn& f, std::vector<Tensor<double>> inputs, std::uint64_t seed, double h) {
  Tensor<double> weights;
  std::vector<Tensor<double>> grads;
  weighted_loss(f, inputs, &weights, seed, &grads);
  double worst = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    double max_fd = 0, max_diff = 0;
    for (std::size_t k = 0; k < inputs[i].size(); ++k) {
      const double x = inputs[i][k];
      inputs[i][k] = x + h;
      const double lp = weighted_loss(f, inputs, &weights, seed, nullptr);
      inputs[i][k] = x - h;
      const double lm = weighted_loss(f, inputs, &weights, seed, nullptr);
      inputs[i][k] = x;
      const double fd = (lp - lm) / (2 * h);
      max_fd = std::max(max_fd, std::abs(fd));
      max_diff = std::max(max_diff, std::abs(fd - grads[i][k]));
    }
    worst = std::max(worst, max_diff / std::max(1.0, max_fd));
  }
  return worst;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("meshnet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace meshnet::testing
