#include "meshnet/mesh_pool.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <string>

#include "meshnet/error.hpp"

namespace meshnet {
namespace {

struct QueueEntry {
  double score;
  EdgeId edge;
  // min-heap on (score, edge)
  bool operator<(const QueueEntry& o) const {
    if (score != o.score) return score > o.score;
    return edge > o.edge;
  }
};

template <typename T>
void check_pool_input(const Tensor<T>& features, std::size_t edges, const char* who) {
  if (features.rank() != 2 || features.cols() != edges) {
    throw ShapeError(std::string(who) + ": features " + shape_string(features.shape()) + " do not match " +
                     std::to_string(edges) + " edges");
  }
}

// Averaging merge on one channel row in pre-pool numbering.
template <typename T>
void merge_row(std::span<T> row, const std::vector<CollapseRecord>& records) {
  for (const auto& r : records) {
    const T e = row[static_cast<std::size_t>(r.edge)];
    const T a = row[static_cast<std::size_t>(r.side1[0])];
    const T b = row[static_cast<std::size_t>(r.side1[1])];
    const T c = row[static_cast<std::size_t>(r.side2[0])];
    const T d = row[static_cast<std::size_t>(r.side2[1])];
    row[static_cast<std::size_t>(r.p)] = (a + b + e) / T{3};
    row[static_cast<std::size_t>(r.q)] = (c + d + e) / T{3};
  }
}

template <typename T>
void merge_row_backward(std::span<T> g, const std::vector<CollapseRecord>& records) {
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    const auto& r = *it;
    const T gp = g[static_cast<std::size_t>(r.p)] / T{3};
    const T gq = g[static_cast<std::size_t>(r.q)] / T{3};
    g[static_cast<std::size_t>(r.side1[0])] = gp;
    g[static_cast<std::size_t>(r.side1[1])] = gp;
    g[static_cast<std::size_t>(r.side2[0])] = gq;
    g[static_cast<std::size_t>(r.side2[1])] = gq;
    g[static_cast<std::size_t>(r.edge)] = gp + gq;
  }
}

}  // namespace

template <typename T>
std::vector<double> edge_priority(const Tensor<T>& features) {
  const auto C = features.rows(), E = features.cols();
  std::vector<double> sq(E, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    const auto row = features.row(c);
    for (std::size_t e = 0; e < E; ++e) sq[e] += static_cast<double>(row[e]) * row[e];
  }
  for (auto& s : sq) s = std::sqrt(s);
  return sq;
}

std::vector<double> random_scores(std::size_t edge_count, std::uint64_t seed) {
  std::vector<EdgeId> order(edge_count);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> scores(edge_count);
  for (std::size_t rank = 0; rank < edge_count; ++rank) scores[static_cast<std::size_t>(order[rank])] = static_cast<double>(rank);
  return scores;
}

PoolPlan plan_pool(const Mesh& mesh, const EdgeTopology& topo, const std::vector<double>& scores,
                   std::size_t target_edges) {
  const auto E = topo.edge_count();
  if (scores.size() != E) throw ShapeError("plan_pool: one score per edge required");
  if (target_edges < 1) throw DataError("plan_pool: target edge count must be >= 1");

  auto history = std::make_shared<PoolHistory>();
  history->mesh_before = mesh;
  history->topo_before = topo;

  EdgeCollapser collapser(mesh, topo);
  std::priority_queue<QueueEntry> queue;
  for (std::size_t e = 0; e < E; ++e) queue.push({scores[e], static_cast<EdgeId>(e)});

  std::vector<QueueEntry> deferred;
  std::size_t collapses_since_refill = 0;
  while (collapser.edge_count() > target_edges) {
    if (queue.empty()) {
      if (deferred.empty() || collapses_since_refill == 0) {
        throw DataError("mesh_pool: no valid collapse left; reached " + std::to_string(collapser.edge_count()) +
                        " edges, target " + std::to_string(target_edges));
      }
      for (const auto& d : deferred)
        if (collapser.alive(d.edge)) queue.push(d);
      deferred.clear();
      collapses_since_refill = 0;
      continue;
    }
    const QueueEntry top = queue.top();
    queue.pop();
    if (!collapser.alive(top.edge)) continue;
    if (!collapser.is_valid(top.edge)) {
      deferred.push_back(top);
      continue;
    }
    history->records.push_back(collapser.collapse(top.edge));
    ++collapses_since_refill;
  }

  CompactedMesh compacted = collapser.compact();
  history->pooled_to_original = compacted.kept_edges;

  // Resolve every pre-pool edge to the pooled edges that absorbed it by
  // walking the records backwards: later merges are already resolved.
  std::vector<std::vector<EdgeId>> final_ids(E);
  for (std::size_t e = 0; e < E; ++e) final_ids[e] = {static_cast<EdgeId>(e)};
  for (auto it = history->records.rbegin(); it != history->records.rend(); ++it) {
    const auto& r = *it;
    const auto& fp = final_ids[static_cast<std::size_t>(r.p)];
    const auto& fq = final_ids[static_cast<std::size_t>(r.q)];
    std::vector<EdgeId> both = fp;
    both.insert(both.end(), fq.begin(), fq.end());
    std::sort(both.begin(), both.end());
    both.erase(std::unique(both.begin(), both.end()), both.end());
    final_ids[static_cast<std::size_t>(r.side1[1])] = fp;
    final_ids[static_cast<std::size_t>(r.side2[1])] = fq;
    final_ids[static_cast<std::size_t>(r.edge)] = std::move(both);
  }
  std::vector<EdgeId> to_pooled(E, -1);
  for (std::size_t k = 0; k < compacted.kept_edges.size(); ++k) {
    to_pooled[static_cast<std::size_t>(compacted.kept_edges[k])] = static_cast<EdgeId>(k);
  }
  history->parents.resize(E);
  for (std::size_t e = 0; e < E; ++e) {
    auto& out = history->parents[e];
    for (auto id : final_ids[e]) out.push_back(to_pooled[static_cast<std::size_t>(id)]);
    std::sort(out.begin(), out.end());
  }

  PoolPlan plan;
  plan.mesh = std::move(compacted.mesh);
  plan.topo = std::move(compacted.topo);
  plan.history = std::move(history);
  return plan;
}

PoolPlan decimate(const Mesh& mesh, const EdgeTopology& topo, std::size_t target_edges, std::uint64_t seed) {
  return plan_pool(mesh, topo, random_scores(topo.edge_count(), seed), target_edges);
}

template <typename T>
Tensor<T> merge_pooled_features(const Tensor<T>& features, const PoolHistory& history) {
  check_pool_input(features, history.original_edge_count(), "merge_pooled_features");
  const auto C = features.rows();
  const auto& keep = history.pooled_to_original;
  Tensor<T> out = Tensor<T>::matrix(C, keep.size());
  std::vector<T> row;
  for (std::size_t c = 0; c < C; ++c) {
    const auto src = features.row(c);
    row.assign(src.begin(), src.end());
    merge_row<T>(row, history.records);
    auto dst = out.row(c);
    for (std::size_t k = 0; k < keep.size(); ++k) dst[k] = row[static_cast<std::size_t>(keep[k])];
  }
  return out;
}

template <typename T>
Var pool_features(Tape<T>& tape, Var features, std::shared_ptr<const PoolHistory> history) {
  Tensor<T> out = merge_pooled_features(tape.value(features), *history);
  return tape.record("mesh_pool", std::move(out), {features},
                     [features, history = std::move(history)](Tape<T>& tp, const Tensor<T>& g) {
                       auto* gx = tp.grad_sink(features);
                       if (!gx) return;
                       const auto E = history->original_edge_count();
                       const auto& keep = history->pooled_to_original;
                       std::vector<T> row(E);
                       for (std::size_t c = 0; c < g.rows(); ++c) {
                         std::fill(row.begin(), row.end(), T{0});
                         const auto src = g.row(c);
                         for (std::size_t k = 0; k < keep.size(); ++k) row[static_cast<std::size_t>(keep[k])] = src[k];
                         merge_row_backward<T>(row, history->records);
                         auto dst = gx->row(c);
                         for (std::size_t e = 0; e < E; ++e) dst[e] += row[e];
                       }
                     });
}

template <typename T>
PoolResult<T> mesh_pool(const Mesh& mesh, const EdgeTopology& topo, const Tensor<T>& features,
                        std::size_t target_edges, PoolMode mode, std::uint64_t seed) {
  check_pool_input(features, topo.edge_count(), "mesh_pool");
  const auto scores = mode == PoolMode::kByNorm ? edge_priority(features) : random_scores(topo.edge_count(), seed);
  PoolPlan plan = plan_pool(mesh, topo, scores, target_edges);
  PoolResult<T> result;
  result.features = merge_pooled_features(features, *plan.history);
  result.mesh = std::move(plan.mesh);
  result.topo = std::move(plan.topo);
  result.history = std::move(plan.history);
  return result;
}

template <typename T>
CollapseResult<T> collapse_edge(const Mesh& mesh, const EdgeTopology& topo, const Tensor<T>& features, EdgeId edge) {
  check_pool_input(features, topo.edge_count(), "collapse_edge");
  EdgeCollapser collapser(mesh, topo);
  PoolHistory history;
  history.records.push_back(collapser.collapse(edge));
  CompactedMesh compacted = collapser.compact();
  history.topo_before = topo;
  history.pooled_to_original = compacted.kept_edges;
  CollapseResult<T> result;
  result.features = merge_pooled_features(features, history);
  result.mesh = std::move(compacted.mesh);
  result.topo = std::move(compacted.topo);
  result.record = history.records.front();
  result.kept_edges = std::move(compacted.kept_edges);
  return result;
}

CompactedMesh replay_history(const PoolHistory& history) {
  EdgeCollapser collapser(history.mesh_before, history.topo_before);
  for (const auto& r : history.records) {
    const auto rec = collapser.collapse(r.edge);
    if (!(rec == r)) throw TopologyError("replay diverged at edge " + std::to_string(r.edge));
  }
  return collapser.compact();
}

template std::vector<double> edge_priority<float>(const Tensor<float>&);
template std::vector<double> edge_priority<double>(const Tensor<double>&);
template Tensor<float> merge_pooled_features<float>(const Tensor<float>&, const PoolHistory&);
template Tensor<double> merge_pooled_features<double>(const Tensor<double>&, const PoolHistory&);
template Var pool_features<float>(Tape<float>&, Var, std::shared_ptr<const PoolHistory>);
template Var pool_features<double>(Tape<double>&, Var, std::shared_ptr<const PoolHistory>);
template PoolResult<float> mesh_pool<float>(const Mesh&, const EdgeTopology&, const Tensor<float>&, std::size_t,
                                            PoolMode, std::uint64_t);
template PoolResult<double> mesh_pool<double>(const Mesh&, const EdgeTopology&, const Tensor<double>&, std::size_t,
                                              PoolMode, std::uint64_t);
template CollapseResult<float> collapse_edge<float>(const Mesh&, const EdgeTopology&, const Tensor<float>&, EdgeId);
template CollapseResult<double> collapse_edge<double>(const Mesh&, const EdgeTopology&, const Tensor<double>&, EdgeId);

}  // namespace meshnet
