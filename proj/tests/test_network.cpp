#include <map>
#include <random>

#include "doctest.h"
#include "meshnet/error.hpp"
#include "meshnet/features.hpp"
#include "meshnet/network.hpp"
#include "meshnet/primitives.hpp"
#include "support.hpp"

using namespace meshnet;

namespace {

Tensor<float> standardized(const Mesh& m, const EdgeTopology& t) {
  const auto f = compute_input_features(m, t);
  std::vector<EdgeFeatures> one{f};
  return apply_stats(f, fit_stats(one)).cast<float>();
}

std::vector<float> logits_of(const Network& net, const Mesh& m, const EdgeTopology& t, const Tensor<float>& x,
                             ForwardResult* keep = nullptr) {
  Tape<float> tape;
  ForwardOptions opts;
  opts.keep_levels = keep != nullptr;
  auto r = net.forward(tape, m, t, x, opts);
  const auto& v = tape.value(r.logits);
  std::vector<float> out(v.data().begin(), v.data().end());
  if (keep) *keep = std::move(r);
  return out;
}

}  // namespace

TEST_CASE("classification net: shapes, parameter names and counts") {
  Network net(default_network_config(Task::kClassification, 30));
  net.initialize(1);
  const std::size_t expected = (5 * 32 * 5 + 32) + (32 * 64 * 5 + 64) + (64 * 128 * 5 + 128) +
                               (128 * 256 * 5 + 256) + 2 * (32 + 64 + 128 + 256) + (256 * 100 + 100) +
                               (100 * 30 + 30);
  CHECK(net.parameter_count() == expected);
  REQUIRE(net.find("stage0/conv/weight"));
  CHECK(net.find("stage0/conv/weight")->value.shape() == std::vector<std::size_t>{32, 5, 5});
  CHECK(net.find("stage3/norm/gamma")->value.shape() == std::vector<std::size_t>{256});
  CHECK(net.find("fc1/weight")->value.shape() == std::vector<std::size_t>{30, 100});
  CHECK(net.find("nope") == nullptr);

  const auto m = uv_sphere(25, 10);
  const auto t = build_edge_topology(m);
  ForwardResult r;
  const auto logits = logits_of(net, m, t, standardized(m, t), &r);
  CHECK(logits.size() == 30);
  REQUIRE(r.levels.size() == 4);
  const std::size_t counts[4] = {600, 450, 300, 279};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.levels[i].topo.edge_count() == counts[i]);
    CHECK(euler_characteristic(r.levels[i].mesh, r.levels[i].topo) == 2);
  }
}

TEST_CASE("initialization is seeded") {
  Network a(default_network_config(Task::kClassification, 2)), b = a, c = a;
  a.initialize(3);
  b.initialize(3);
  c.initialize(4);
  CHECK(a.find("stage1/conv/weight")->value == b.find("stage1/conv/weight")->value);
  CHECK_FALSE(a.find("stage1/conv/weight")->value == c.find("stage1/conv/weight")->value);
  for (auto v : a.find("stage1/conv/bias")->value.data()) CHECK(v == 0);
  for (auto v : a.find("stage1/norm/gamma")->value.data()) CHECK(v == 1);
}

TEST_CASE("face order does not change the prediction") {
  std::mt19937_64 rng(2);
  Network net(default_network_config(Task::kClassification, 3));
  net.initialize(2);
  for (int i = 0; i < 3; ++i) {
    const auto g = grid_for_edges(750);
    auto m = transform_mesh(uv_sphere(g.segments, g.rings), scale_matrix(1, 1.3, 0.8));
    std::normal_distribution<double> n(0, 0.01);
    for (auto& p : m.vertices)
      for (auto& x : p) x += n(rng);
    const auto s = testing::shuffle_faces(m, rng);
    const auto t1 = build_edge_topology(m), t2 = build_edge_topology(s);
    const auto f1 = compute_input_features(m, t1);
    std::vector<EdgeFeatures> one{f1};
    const auto stats = fit_stats(one);
    const auto l1 = logits_of(net, m, t1, apply_stats(f1, stats).cast<float>());
    const auto l2 = logits_of(net, s, t2, apply_stats(compute_input_features(s, t2), stats).cast<float>());
    for (std::size_t k = 0; k < l1.size(); ++k) CHECK(l2[k] == doctest::Approx(l1[k]).epsilon(1e-5));
  }
}

TEST_CASE("rigid motion keeps the predicted label") {
  std::mt19937_64 rng(3);
  Network net(default_network_config(Task::kClassification, 4));
  net.initialize(5);
  const auto m = testing::random_closed_mesh(rng, 750);
  const auto t = build_edge_topology(m);
  std::vector<EdgeFeatures> one{compute_input_features(m, t)};
  const auto stats = fit_stats(one);
  auto predict = [&](const Mesh& mm) {
    const auto l = logits_of(net, mm, t, apply_stats(compute_input_features(mm, t), stats).cast<float>());
    return std::max_element(l.begin(), l.end()) - l.begin();
  };
  const auto base = predict(m);
  for (int i = 0; i < 5; ++i) CHECK(predict(transform_mesh(m, random_rotation(rng), {1, -2, 3})) == base);
}

TEST_CASE("segmentation net emits per-edge logits") {
  NetworkConfig c = default_network_config(Task::kSegmentation, 3);
  c.input_edges = 750;
  c.conv_channels = {8, 16, 16, 24};
  c.pool_targets = {399, 300, 99, 93};
  Network net(c);
  net.initialize(1);
  CHECK(net.find("enc0/conv1/weight"));
  CHECK(net.find("dec0/conv2/weight"));
  CHECK(net.find("head/weight")->value.shape() == std::vector<std::size_t>{3, 8, 5});
  CHECK(net.find("enc1/shortcut/weight"));
  const auto m = uv_sphere(25, 10);
  const auto t = build_edge_topology(m);
  ForwardResult r;
  const auto logits = logits_of(net, m, t, standardized(m, t), &r);
  CHECK(logits.size() == 3 * 750);
  CHECK(r.levels.size() == 4);
}

TEST_CASE("random pooling depends only on the pool seed") {
  NetworkConfig c = default_network_config(Task::kClassification, 2);
  c.pooling = PoolMode::kRandom;
  Network net(c);
  net.initialize(1);
  const auto m = uv_sphere(25, 10);
  const auto t = build_edge_topology(m);
  const auto x = standardized(m, t);
  auto run = [&](std::uint64_t seed) {
    Tape<float> tape;
    ForwardOptions o;
    o.pool_seed = seed;
    o.keep_levels = true;
    auto r = net.forward(tape, m, t, x, o);
    return r.levels[0].history->records;
  };
  CHECK(run(4) == run(4));
  CHECK_FALSE(run(4) == run(5));
}

TEST_CASE("config validation and input errors") {
  auto c = default_network_config(Task::kClassification, 2);
  c.pool_targets = {600, 451, 300, 279};
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = default_network_config(Task::kClassification, 2);
  c.pool_targets = {600, 450};
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = default_network_config(Task::kClassification, 2);
  c.fc_dims = {100, 3};
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = default_network_config(Task::kClassification, 2);
  c.pool_targets = {600, 450, 300, 3};
  CHECK_THROWS_AS(validate(c), ConfigError);

  Network net(default_network_config(Task::kClassification, 2));
  net.initialize(0);
  const auto m = icosphere(2);
  const auto t = build_edge_topology(m);
  Tape<float> tape;
  CHECK_THROWS_AS(net.forward(tape, m, t, standardized(m, t)), DataError);
  Tape<float> tape2;
  const auto uv = uv_sphere(25, 10);
  const auto tu = build_edge_topology(uv);
  CHECK_THROWS_AS(net.forward(tape2, uv, tu, Tensor<float>::matrix(3, 750)), ShapeError);
}
