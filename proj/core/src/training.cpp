#include "meshnet/training.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "json.hpp"
#include "meshnet/adam.hpp"
#include "meshnet/augment.hpp"
#include "meshnet/error.hpp"
#include "meshnet/seed.hpp"

namespace fs = std::filesystem;

namespace meshnet {
namespace {

enum Stream : std::uint64_t { kShuffle = 11, kAugment = 12, kTrainPool = 13, kEvalPool = 14, kValSplit = 15 };

struct Outcome {
  double loss = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<Tensor<float>> grads;
};

std::vector<std::int32_t> targets_of(const Sample& s, Task task) {
  if (task == Task::kClassification) return {s.label};
  return {s.edge_labels.begin(), s.edge_labels.end()};
}

std::vector<int> argmax_cols(const Tensor<float>& logits) {
  std::vector<int> out(logits.cols(), 0);
  for (std::size_t j = 0; j < logits.cols(); ++j) {
    float best = logits(0, j);
    for (std::size_t c = 1; c < logits.rows(); ++c) {
      if (logits(c, j) > best) {
        best = logits(c, j);
        out[j] = static_cast<int>(c);
      }
    }
  }
  return out;
}

Outcome run_sample(const Network& net, const Mesh& mesh, const EdgeTopology& topo, const Tensor<float>& input,
                   const std::vector<std::int32_t>& targets, std::uint64_t pool_seed, bool with_grad) {
  Tape<float> tape;
  const auto res = net.forward(tape, mesh, topo, input, {pool_seed, false});
  const Var loss = ad::softmax_cross_entropy(tape, res.logits, targets);
  Outcome o;
  o.loss = tape.value(loss)[0];
  const auto pred = argmax_cols(tape.value(res.logits));
  for (std::size_t j = 0; j < pred.size(); ++j) o.correct += pred[j] == targets[j] ? 1 : 0;
  o.total = pred.size();
  if (with_grad) {
    tape.backward(loss);
    o.grads.resize(net.parameters().size());
    tape.accumulate_parameter_grads(o.grads);
  }
  return o;
}

EvalMetrics evaluate_inputs(const Network& net, const std::vector<Sample>& samples,
                            const std::vector<Tensor<float>>& inputs, const RunConfig& config) {
  EvalMetrics m;
  if (samples.empty()) return m;
  std::vector<Outcome> outs(samples.size());
  const auto base = mix_seed(config.train.seed, kEvalPool);
  parallel_for(samples.size(), config.train.threads, [&](std::size_t i) {
    outs[i] = run_sample(net, samples[i].mesh, samples[i].topo, inputs[i], targets_of(samples[i], config.network.task),
                         mix_seed(base, i), false);
  });
  double loss = 0;
  for (const auto& o : outs) {
    loss += o.loss;
    m.correct += o.correct;
    m.total += o.total;
  }
  m.loss = loss / static_cast<double>(samples.size());
  m.accuracy = m.total ? static_cast<double>(m.correct) / static_cast<double>(m.total) : 0.0;
  return m;
}

void check_resolution(const std::vector<Sample>& samples, const NetworkConfig& nc) {
  for (const auto& s : samples) {
    if (s.topo.edge_count() < nc.pool_targets.front()) {
      throw DataError(s.name + " has " + std::to_string(s.topo.edge_count()) +
                      " edges, fewer than the first pool target " + std::to_string(nc.pool_targets.front()));
    }
  }
}

bool augments(const AugmentParams& a) {
  return a.aniso_sigma > 0 || a.slide_fraction > 0 || a.flip_fraction > 0 || a.collapse_fraction > 0;
}

}  // namespace

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string to_json(const EpochMetrics& m) {
  nlohmann::ordered_json j;
  j["epoch"] = m.epoch;
  j["batch_loss"] = m.batch_loss;
  j["train_loss"] = m.train.loss;
  j["train_accuracy"] = m.train.accuracy;
  if (m.has_val) {
    j["val_loss"] = m.val.loss;
    j["val_accuracy"] = m.val.accuracy;
  }
  return j.dump();
}

Tensor<float> network_input(const Mesh& mesh, const EdgeTopology& topo, FeatureMode mode, const FeatureStats& stats) {
  return apply_stats(compute_features(mesh, topo, mode), stats).cast<float>();
}

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const RunConfig& config,
                  const EpochCallback& on_epoch) {
  validate(config);
  if (train_set.empty()) throw DataError("training set is empty");
  const auto& nc = config.network;
  const auto& tp = config.train;
  check_labels(train_set, nc.task, nc.num_classes);
  check_labels(val_set, nc.task, nc.num_classes);
  check_resolution(train_set, nc);
  check_resolution(val_set, nc);

  std::vector<EdgeFeatures> raw;
  raw.reserve(train_set.size());
  for (const auto& s : train_set) raw.push_back(compute_features(s.mesh, s.topo, config.feature_mode));
  const FeatureStats stats = fit_stats(raw);
  std::vector<Tensor<float>> train_inputs, val_inputs;
  for (const auto& r : raw) train_inputs.push_back(apply_stats(r, stats).cast<float>());
  raw.clear();
  for (const auto& s : val_set) val_inputs.push_back(network_input(s.mesh, s.topo, config.feature_mode, stats));

  Network net(nc);
  net.initialize(tp.seed);
  auto& params = net.parameters();
  AdamState<float> adam;
  adam.lr = tp.lr;

  TrainResult result;
  result.last = make_checkpoint(config, stats, net, 0, &adam);
  result.best = result.last;
  const bool augmenting = augments(config.augment);
  double best_metric = -1;

  for (std::size_t epoch = 0; epoch < tp.epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(mix_seed(tp.seed, kShuffle, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += tp.batch_size) {
      const std::size_t count = std::min(tp.batch_size, order.size() - start);
      std::vector<Outcome> outs(count);
      parallel_for(count, tp.threads, [&](std::size_t k) {
        const std::size_t idx = order[start + k];
        const Sample& s = train_set[idx];
        const auto pool_seed = mix_seed(tp.seed, kTrainPool, epoch * train_set.size() + idx);
        const auto targets = targets_of(s, nc.task);
        if (!augmenting) {
          outs[k] = run_sample(net, s.mesh, s.topo, train_inputs[idx], targets, pool_seed, true);
          return;
        }
        AugmentParams ap = config.augment;
        ap.seed = mix_seed(tp.seed, kAugment, epoch * train_set.size() + idx);
        const auto aug = augment(s.mesh, s.topo, ap);
        const auto input = network_input(aug.mesh, aug.topo, config.feature_mode, stats);
        outs[k] = run_sample(net, aug.mesh, aug.topo, input, targets, pool_seed, true);
      });

      std::vector<Tensor<float>> grads;
      grads.reserve(params.size());
      for (const auto& p : params) grads.emplace_back(p.value.shape(), 0.0f);
      double batch_loss = 0;
      for (const auto& o : outs) {
        batch_loss += o.loss;
        for (std::size_t i = 0; i < grads.size(); ++i) {
          if (o.grads[i].empty()) continue;
          auto d = grads[i].data();
          const auto s = o.grads[i].data();
          for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
        }
      }
      const float inv = 1.0f / static_cast<float>(count);
      for (auto& g : grads)
        for (auto& v : g.data()) v *= inv;
      adam_step<float>(params, grads, adam);
      loss_sum += batch_loss / static_cast<double>(count);
      ++steps;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.batch_loss = loss_sum / static_cast<double>(steps);
    m.train = evaluate_inputs(net, train_set, train_inputs, config);
    m.has_val = !val_set.empty();
    if (m.has_val) m.val = evaluate_inputs(net, val_set, val_inputs, config);
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);

    result.last = make_checkpoint(config, stats, net, epoch + 1, &adam);
    const double metric = m.has_val ? m.val.accuracy : m.train.accuracy;
    if (metric > best_metric) {
      best_metric = metric;
      result.best = result.last;
      result.best_epoch = epoch + 1;
    }
  }
  return result;
}

TrainingSplit split_for_training(const Dataset& dataset, std::uint64_t seed) {
  TrainingSplit split;
  split.train = load_samples(dataset, Split::kTrain);
  split.val = load_samples(dataset, Split::kTest);
  if (split.val.empty() && split.train.size() >= 2) {
    std::vector<std::size_t> order(split.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(seed, kValSplit));
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_val = std::max<std::size_t>(1, split.train.size() / 10);
    std::vector<std::uint8_t> held(split.train.size(), 0);
    for (std::size_t k = 0; k < n_val; ++k) held[order[k]] = 1;
    std::vector<Sample> train;
    for (std::size_t i = 0; i < split.train.size(); ++i) {
      (held[i] ? split.val : train).push_back(std::move(split.train[i]));
    }
    split.train = std::move(train);
  }
  return split;
}

TrainResult train(const Dataset& dataset, const RunConfig& config, const EpochCallback& on_epoch) {
  if (dataset.task != config.network.task) throw ConfigError("dataset task does not match config task");
  if (dataset.task == Task::kClassification && dataset.class_names.size() != config.network.num_classes) {
    throw DataError("dataset has " + std::to_string(dataset.class_names.size()) + " classes, config num_classes is " +
                    std::to_string(config.network.num_classes));
  }
  auto split = split_for_training(dataset, config.train.seed);
  return train(split.train, split.val, config, on_epoch);
}

EvalMetrics evaluate(const Network& net, const FeatureStats& stats, const RunConfig& config,
                     const std::vector<Sample>& samples) {
  check_labels(samples, config.network.task, config.network.num_classes);
  check_resolution(samples, config.network);
  std::vector<Tensor<float>> inputs(samples.size());
  parallel_for(samples.size(), config.train.threads, [&](std::size_t i) {
    inputs[i] = network_input(samples[i].mesh, samples[i].topo, config.feature_mode, stats);
  });
  return evaluate_inputs(net, samples, inputs, config);
}

EvalMetrics evaluate(const Checkpoint& ckpt, const std::vector<Sample>& samples) {
  const Network net = restore_network(ckpt);
  return evaluate(net, ckpt.stats, ckpt.config, samples);
}

Prediction infer(const Checkpoint& ckpt, const Mesh& mesh, const EdgeTopology& topo, bool keep_levels) {
  const Network net = restore_network(ckpt);
  const auto& nc = ckpt.config.network;
  if (topo.edge_count() < nc.pool_targets.front()) {
    throw DataError("mesh has " + std::to_string(topo.edge_count()) + " edges, fewer than the first pool target " +
                    std::to_string(nc.pool_targets.front()));
  }
  const auto input = network_input(mesh, topo, ckpt.config.feature_mode, ckpt.stats);
  Tape<float> tape;
  auto res = net.forward(tape, mesh, topo, input, {mix_seed(mix_seed(ckpt.config.train.seed, kEvalPool), 0), keep_levels});
  Prediction p;
  p.logits = tape.value(res.logits);
  const auto labels = argmax_cols(p.logits);
  if (nc.task == Task::kClassification) {
    p.label = labels.front();
  } else {
    p.edge_labels = labels;
  }
  p.levels = std::move(res.levels);
  return p;
}

std::vector<fs::path> export_pools(const Prediction& prediction, Task task, const fs::path& dir,
                                   const std::string& stem) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  std::vector<int> labels = prediction.edge_labels;
  for (std::size_t i = 0; i < prediction.levels.size(); ++i) {
    const auto& level = prediction.levels[i];
    std::vector<int> pooled(level.topo.edge_count(), prediction.label);
    if (task == Task::kSegmentation) {
      const auto& keep = level.history->pooled_to_original;
      for (std::size_t k = 0; k < keep.size(); ++k) pooled[k] = labels[static_cast<std::size_t>(keep[k])];
      labels = pooled;
    }
    const auto path = dir / (stem + "_pool" + std::to_string(i + 1) + ".ply");
    export_mesh(level.mesh, level.topo, std::span<const int>(pooled), path);
    written.push_back(path);
  }
  return written;
}

}  // namespace meshnet
