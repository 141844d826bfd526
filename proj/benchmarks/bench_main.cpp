#include <random>

#include <benchmark/benchmark.h>

#include "meshnet/features.hpp"
#include "meshnet/mesh_conv.hpp"
#include "meshnet/mesh_pool.hpp"
#include "meshnet/mesh_unpool.hpp"
#include "meshnet/network.hpp"
#include "meshnet/primitives.hpp"

using namespace meshnet;

namespace {

Tensor<float> noise(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n;
  Tensor<float> t = Tensor<float>::matrix(rows, cols);
  for (auto& v : t.data()) v = n(rng);
  return t;
}

void BM_Topology(benchmark::State& state) {
  const auto m = icosphere(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_edge_topology(m));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(m.faces.size()));
}
BENCHMARK(BM_Topology)->Arg(2)->Arg(4);

void BM_Features(benchmark::State& state) {
  const auto m = uv_sphere(25, 10);
  const auto t = build_edge_topology(m);
  for (auto _ : state) benchmark::DoNotOptimize(compute_input_features(m, t));
}
BENCHMARK(BM_Features);

void BM_ConvForward(benchmark::State& state) {
  const auto m = uv_sphere(25, 10);
  const auto t = build_edge_topology(m);
  const auto in = static_cast<std::size_t>(state.range(0));
  const auto out = static_cast<std::size_t>(state.range(1));
  ConvKernel<float> k{noise(out, in * 5, 1).reshaped({out, in, 5}), Tensor<float>({out}, 0.0f)};
  const auto x = noise(in, t.edge_count(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(mesh_conv_forward(k, x, t));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(2 * out * in * 5 * t.edge_count()));
}
BENCHMARK(BM_ConvForward)->Args({5, 32})->Args({32, 64})->Args({128, 256});

void BM_Pool(benchmark::State& state) {
  const auto m = uv_sphere(25, 10);
  const auto t = build_edge_topology(m);
  const auto x = noise(32, t.edge_count(), 3);
  const auto target = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mesh_pool(m, t, x, target));
}
BENCHMARK(BM_Pool)->Arg(600)->Arg(300);

void BM_Unpool(benchmark::State& state) {
  const auto m = uv_sphere(25, 10);
  const auto t = build_edge_topology(m);
  const auto r = mesh_pool(m, t, noise(32, t.edge_count(), 4), 300);
  for (auto _ : state) benchmark::DoNotOptimize(unpool_features(r.features, *r.history));
}
BENCHMARK(BM_Unpool);

void BM_ClassifierStep(benchmark::State& state) {
  Network net(default_network_config(Task::kClassification, 2));
  net.initialize(0);
  const auto m = uv_sphere(25, 10);
  const auto t = build_edge_topology(m);
  const auto x = compute_input_features(m, t).cast<float>();
  for (auto _ : state) {
    Tape<float> tape;
    const auto r = net.forward(tape, m, t, x);
    const Var loss = ad::softmax_cross_entropy(tape, r.logits, {1});
    tape.backward(loss);
    benchmark::DoNotOptimize(tape.size());
  }
}
BENCHMARK(BM_ClassifierStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
