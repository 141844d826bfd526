#include "meshnet/network.hpp"

#include <cmath>
#include <random>

#include "meshnet/error.hpp"
#include "meshnet/mesh_conv.hpp"
#include "meshnet/mesh_unpool.hpp"
#include "meshnet/seed.hpp"

namespace meshnet {

NetworkConfig default_network_config(Task task, std::size_t num_classes) {
  NetworkConfig c;
  c.task = task;
  c.num_classes = num_classes;
  if (task == Task::kSegmentation) {
    c.input_edges = 2250;
    c.pool_targets = {1200, 900, 300, 279};
    c.fc_dims.clear();
  } else {
    c.fc_dims = {100, num_classes};
  }
  return c;
}

void validate(const NetworkConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (c.input_channels != 5 && c.input_channels != 3) fail("input_channels must be 5 or 3");
  if (c.num_classes < 2) fail("num_classes must be at least 2");
  if (c.norm_groups < 1) fail("norm_groups must be at least 1");
  if (c.conv_channels.empty()) fail("conv_channels must not be empty");
  for (auto w : c.conv_channels)
    if (w == 0) fail("conv_channels entries must be positive");
  if (c.pool_targets.size() != c.conv_channels.size()) {
    fail("pool_targets needs one entry per conv layer (" + std::to_string(c.conv_channels.size()) + "), got " +
         std::to_string(c.pool_targets.size()));
  }
  std::size_t prev = c.input_edges;
  for (auto t : c.pool_targets) {
    if (t >= prev) fail("pool_targets must be strictly decreasing and below input_edges");
    if ((prev - t) % 3 != 0) {
      fail("pool target " + std::to_string(t) + " is not reachable from " + std::to_string(prev) +
           " edges in steps of 3");
    }
    prev = t;
  }
  if (c.pool_targets.back() < 6) fail("pool targets below 6 edges are unreachable");
  if (c.task == Task::kClassification) {
    if (c.fc_dims.empty() || c.fc_dims.back() != c.num_classes) fail("fc_dims must end with num_classes");
    for (auto w : c.fc_dims)
      if (w == 0) fail("fc_dims entries must be positive");
  }
}

struct Network::Bound {
  Tape<float>& tape;
  std::vector<Var> vars;
  Var operator[](std::size_t i) const { return vars[i]; }
};

Network::Network(NetworkConfig config) : config_(std::move(config)) {
  validate(config_);
  const auto& ch = config_.conv_channels;
  if (config_.task == Task::kClassification) {
    std::size_t in = config_.input_channels;
    for (std::size_t i = 0; i < ch.size(); ++i) {
      const std::string p = "stage" + std::to_string(i);
      cls_convs_.push_back(add_conv(p + "/conv", in, ch[i]));
      cls_norms_.push_back(add_norm(p + "/norm", ch[i]));
      in = ch[i];
    }
    for (std::size_t j = 0; j < config_.fc_dims.size(); ++j) {
      fcs_.push_back(add_linear("fc" + std::to_string(j), in, config_.fc_dims[j]));
      in = config_.fc_dims[j];
    }
  } else {
    std::size_t in = config_.input_channels;
    for (std::size_t i = 0; i < ch.size(); ++i) {
      enc_.push_back(add_res("enc" + std::to_string(i), in, ch[i]));
      in = ch[i];
    }
    // dec_[i] restores the resolution of enc_[i]'s output.
    dec_.resize(ch.size());
    for (std::size_t i = ch.size(); i-- > 0;) {
      const std::size_t out = i > 0 ? ch[i - 1] : ch[0];
      dec_[i] = add_res("dec" + std::to_string(i), in + ch[i], out);
      in = out;
    }
    head_ = add_conv("head", in, config_.num_classes);
  }
}

std::size_t Network::add(std::string name, std::vector<std::size_t> shape) {
  params_.push_back({std::move(name), Tensor<float>(std::move(shape))});
  return params_.size() - 1;
}

Network::ConvRef Network::add_conv(const std::string& prefix, std::size_t in, std::size_t out) {
  const auto w = add(prefix + "/weight", {out, in, kConvSlots});
  const auto b = add(prefix + "/bias", {out});
  return {w, b};
}

Network::NormRef Network::add_norm(const std::string& prefix, std::size_t channels) {
  const auto g = add(prefix + "/gamma", {channels});
  const auto b = add(prefix + "/beta", {channels});
  return {g, b};
}

Network::LinearRef Network::add_linear(const std::string& prefix, std::size_t in, std::size_t out) {
  const auto w = add(prefix + "/weight", {out, in});
  const auto b = add(prefix + "/bias", {out});
  return {w, b};
}

Network::ResRef Network::add_res(const std::string& prefix, std::size_t in, std::size_t out) {
  ResRef r;
  r.conv1 = add_conv(prefix + "/conv1", in, out);
  r.norm1 = add_norm(prefix + "/norm1", out);
  r.conv2 = add_conv(prefix + "/conv2", out, out);
  r.norm2 = add_norm(prefix + "/norm2", out);
  if (in != out) r.shortcut = add_linear(prefix + "/shortcut", in, out);
  return r;
}

void Network::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x1417));
  for (auto& p : params_) {
    const auto& name = p.name;
    const auto& shape = p.value.shape();
    auto ends_with = [&](std::string_view s) {
      return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with("/gamma")) {
      p.value.fill(1.0f);
    } else if (ends_with("/weight")) {
      std::size_t fan_in = 1;
      for (std::size_t k = 1; k < shape.size(); ++k) fan_in *= shape[k];
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (auto& v : p.value.data()) v = static_cast<float>(dist(rng));
    } else {
      p.value.fill(0.0f);
    }
  }
}

Parameter<float>* Network::find(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Var Network::conv(Bound& b, const ConvRef& r, Var x, const EdgeTopology& topo) const {
  return mesh_conv(b.tape, b[r.weight], b[r.bias], x, topo);
}

Var Network::norm(Bound& b, const NormRef& r, Var x) const {
  return ad::group_norm(b.tape, x, config_.norm_groups, b[r.gamma], b[r.beta]);
}

Var Network::res_block(Bound& b, const ResRef& r, Var x, const EdgeTopology& topo) const {
  auto& t = b.tape;
  Var y = conv(b, r.conv1, x, topo);
  y = ad::relu(t, norm(b, r.norm1, y));
  y = norm(b, r.norm2, conv(b, r.conv2, y, topo));
  const Var skip = r.shortcut ? ad::linear(t, b[r.shortcut->weight], x, b[r.shortcut->bias]) : x;
  return ad::relu(t, ad::add(t, y, skip));
}

ForwardResult Network::forward(Tape<float>& tape, const Mesh& mesh, const EdgeTopology& topo,
                               const Tensor<float>& features, const ForwardOptions& options) const {
  if (features.rank() != 2 || features.rows() != config_.input_channels || features.cols() != topo.edge_count()) {
    throw ShapeError("network input " + shape_string(features.shape()) + " does not match " +
                     std::to_string(config_.input_channels) + " x " + std::to_string(topo.edge_count()));
  }
  if (topo.edge_count() < config_.pool_targets.front()) {
    throw DataError("mesh has " + std::to_string(topo.edge_count()) + " edges, fewer than the first pool target " +
                    std::to_string(config_.pool_targets.front()));
  }
  Bound b{tape, {}};
  b.vars.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) b.vars.push_back(tape.parameter(params_[i], i));

  ForwardResult result;
  Mesh cur_mesh = mesh;
  EdgeTopology cur_topo = topo;
  auto pool = [&](Var x, std::size_t layer) {
    const auto scores = config_.pooling == PoolMode::kByNorm
                            ? edge_priority(tape.value(x))
                            : random_scores(cur_topo.edge_count(), mix_seed(options.pool_seed, layer));
    PoolPlan plan = plan_pool(cur_mesh, cur_topo, scores, config_.pool_targets[layer]);
    Var pooled = pool_features(tape, x, plan.history);
    if (options.keep_levels) result.levels.push_back({plan.mesh, plan.topo, plan.history});
    cur_mesh = std::move(plan.mesh);
    cur_topo = std::move(plan.topo);
    return std::pair{pooled, plan.history};
  };

  Var x = tape.constant(features);
  if (config_.task == Task::kClassification) {
    for (std::size_t i = 0; i < cls_convs_.size(); ++i) {
      x = ad::relu(tape, conv(b, cls_convs_[i], x, cur_topo));
      x = norm(b, cls_norms_[i], x);
      x = pool(x, i).first;
    }
    x = ad::mean_over_axis(tape, x, 1);
    for (std::size_t j = 0; j < fcs_.size(); ++j) {
      x = ad::linear(tape, b[fcs_[j].weight], x, b[fcs_[j].bias]);
      if (j + 1 < fcs_.size()) x = ad::relu(tape, x);
    }
  } else {
    struct Skip {
      Var features;
      EdgeTopology topo;
      std::shared_ptr<const PoolHistory> history;
    };
    std::vector<Skip> skips;
    for (std::size_t i = 0; i < enc_.size(); ++i) {
      x = res_block(b, enc_[i], x, cur_topo);
      EdgeTopology before = cur_topo;
      auto [pooled, history] = pool(x, i);
      skips.push_back({x, std::move(before), std::move(history)});
      x = pooled;
    }
    for (std::size_t i = dec_.size(); i-- > 0;) {
      auto& s = skips[i];
      x = mesh_unpool(tape, x, s.history);
      x = ad::concat_rows(tape, x, s.features);
      x = res_block(b, dec_[i], x, s.topo);
    }
    x = conv(b, head_, x, topo);
  }
  result.logits = x;
  return result;
}

}  // namespace meshnet
