#include <random>

#include "doctest.h"
#include "meshnet/error.hpp"
#include "meshnet/mesh_conv.hpp"
#include "meshnet/mesh_pool.hpp"
#include "meshnet/mesh_unpool.hpp"
#include "meshnet/primitives.hpp"
#include "support.hpp"

using namespace meshnet;
using testing::random_tensor;

TEST_CASE("unpool with empty history is the identity") {
  std::mt19937_64 rng(1);
  const auto m = icosphere(1);
  const auto t = build_edge_topology(m);
  const auto plan = plan_pool(m, t, random_scores(t.edge_count(), 1), t.edge_count());
  CHECK(plan.history->records.empty());
  const auto x = random_tensor({3, t.edge_count()}, rng);
  CHECK(unpool_features(x, *plan.history) == x);
}

TEST_CASE("single collapse unpool by hand") {
  std::mt19937_64 rng(2);
  const auto m = icosphere(1);
  const auto t = build_edge_topology(m);
  const EdgeId e = 40;
  std::vector<double> scores(t.edge_count(), 1.0);
  scores[static_cast<std::size_t>(e)] = 0.0;
  const auto plan = plan_pool(m, t, scores, t.edge_count() - 3);
  const auto& h = *plan.history;
  REQUIRE(h.records.size() == 1);
  const auto [a, b, c, d] = t.neighbors[static_cast<std::size_t>(e)];

  const auto pooled = random_tensor({2, h.pooled_edge_count()}, rng);
  std::vector<std::size_t> pooled_id(t.edge_count(), 999);
  for (std::size_t k = 0; k < h.pooled_edge_count(); ++k) pooled_id[static_cast<std::size_t>(h.pooled_to_original[k])] = k;

  const auto [topo, up] = mesh_unpool(pooled, h);
  CHECK(topo == t);
  REQUIRE(up.shape() == std::vector<std::size_t>{2, t.edge_count()});
  for (std::size_t ch = 0; ch < 2; ++ch) {
    for (std::size_t x = 0; x < t.edge_count(); ++x) {
      double expect;
      if (x == static_cast<std::size_t>(b)) expect = pooled(ch, pooled_id[a]);
      else if (x == static_cast<std::size_t>(d)) expect = pooled(ch, pooled_id[c]);
      else if (x == static_cast<std::size_t>(e)) expect = (pooled(ch, pooled_id[a]) + pooled(ch, pooled_id[c])) / 2;
      else expect = pooled(ch, pooled_id[x]);
      CHECK(up(ch, x) == doctest::Approx(expect).epsilon(1e-15));
    }
  }
}

TEST_CASE("unpool restores the snapshot topology exactly") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    const auto m = testing::random_closed_mesh(rng, 600);
    const auto t = build_edge_topology(m);
    const auto r = mesh_pool(m, t, random_tensor({2, t.edge_count()}, rng), t.edge_count() * 2 / 3,
                             PoolMode::kRandom, rng());
    const auto [topo, up] = mesh_unpool(r.features, *r.history);
    CHECK(topo == t);
    CHECK(up.cols() == t.edge_count());
  }
}

TEST_CASE("constant features are a fixed point, exactly") {
  std::mt19937_64 rng(4);
  const auto m = uv_sphere(25, 10);
  const auto t = build_edge_topology(m);
  const auto r = mesh_pool(m, t, random_tensor({1, 750}, rng), 450, PoolMode::kRandom, 4);
  for (double c : {0.1, 1.0 / 3.0, -7.25, 1e10, 0.7}) {
    const auto pooled = Tensor<double>::matrix(2, 450, c);
    const auto up = unpool_features(pooled, *r.history);
    for (auto v : up.data()) REQUIRE(v == c);
    const auto upf = unpool_features(pooled.cast<float>(), *r.history);
    for (auto v : upf.data()) REQUIRE(v == static_cast<float>(c));
  }
}

TEST_CASE("unpool rejects a width mismatch") {
  const auto m = icosphere(1);
  const auto t = build_edge_topology(m);
  const auto plan = plan_pool(m, t, random_scores(t.edge_count(), 1), 90);
  CHECK_THROWS_AS(unpool_features(Tensor<double>::matrix(1, 91), *plan.history), ShapeError);
}

TEST_CASE("gradient: unpool and a pool-conv-unpool stack") {
  std::mt19937_64 rng(5);
  const auto m = icosphere(1);
  const auto t = build_edge_topology(m);
  const auto plan = plan_pool(m, t, random_scores(t.edge_count(), 8), 90);
  const auto h = plan.history;
  CHECK(testing::max_gradient_error(
            [&](Tape<double>& tp, const std::vector<Var>& v) { return mesh_unpool(tp, v[0], h); },
            {random_tensor({2, 90}, rng)}) < 1e-4);
  CHECK(testing::max_gradient_error(
            [&](Tape<double>& tp, const std::vector<Var>& v) {
              const Var p = pool_features(tp, v[0], h);
              const Var y = mesh_conv(tp, v[1], v[2], p, plan.topo);
              return mesh_unpool(tp, y, h);
            },
            {random_tensor({2, t.edge_count()}, rng), random_tensor({3, 2, 5}, rng), random_tensor({3}, rng)}) <
        1e-4);
}
