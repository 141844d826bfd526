#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "meshnet/tensor.hpp"

namespace meshnet {

// Learnable tensor, addressed by a slash-separated layer path
// ("enc0/conv1/weight").
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

// Handle to a node recorded on a Tape.
struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;
  bool valid() const noexcept { return id != kInvalid; }
};

// Reverse-mode tape. Nodes are appended in evaluation order; backward()
// walks them in exact reverse order. A Tape is single-threaded and meant to
// live for one forward/backward pass.
template <typename T>
class Tape {
 public:
  // Receives the gradient flowing into the op's output and pushes
  // contributions to its inputs through grad_sink().
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& grad_out)>;

  Var constant(Tensor<T> value);
  Var variable(Tensor<T> value);
  // References (does not copy) the parameter value; `slot` is the index the
  // gradient is reported under by accumulate_parameter_grads().
  Var parameter(const Parameter<T>& param, std::size_t slot);

  // Appends an op result. Throws NumericError when `value` holds NaN/Inf.
  Var record(std::string_view op, Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn fn);

  const Tensor<T>& value(Var v) const;
  bool requires_grad(Var v) const;

  // Gradient of the last backward() w.r.t. v; zeros if nothing reached it.
  Tensor<T> grad(Var v) const;

  // Mutable gradient accumulator for an op input, or nullptr when that input
  // does not require gradients. Only valid inside a BackwardFn.
  Tensor<T>* grad_sink(Var v);

  void backward(Var loss);

  // grads[slot] += d loss / d parameter for every parameter on the tape.
  void accumulate_parameter_grads(std::span<Tensor<T>> grads) const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::size_t param_slot = Var::kInvalid;
    BackwardFn backward;
    const Tensor<T>& value() const { return external ? *external : owned; }
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

// Differentiable operations. All shapes are explicit; the only broadcast is
// the per-row bias in add_bias/linear. "Columns" are the edge axis.
namespace ad {

template <typename T> Var matmul(Tape<T>& t, Var a, Var b);
template <typename T> Var add(Tape<T>& t, Var a, Var b);
template <typename T> Var scale(Tape<T>& t, Var a, T factor);
// x: rows x cols, bias: rows. Adds bias[r] to every entry of row r.
template <typename T> Var add_bias(Tape<T>& t, Var x, Var bias);
template <typename T> Var relu(Tape<T>& t, Var x);
// Sum of all entries, as a 1-element tensor.
template <typename T> Var sum(Tape<T>& t, Var x);
// out[:, j] = x[:, index[j]]; an index equal to x.cols() yields a zero column.
template <typename T> Var gather_cols(Tape<T>& t, Var x, std::vector<std::int32_t> index);
// out[:, g] = mean of x[:, j] over all j with group[j] == g.
template <typename T>
Var scatter_mean_cols(Tape<T>& t, Var x, std::vector<std::int32_t> group, std::size_t num_groups);
// axis 1: mean across columns -> rows x 1. axis 0: mean across rows -> 1 x cols.
template <typename T> Var mean_over_axis(Tape<T>& t, Var x, int axis);
// Channels are split into `groups` contiguous groups (reduced to the largest
// divisor of the channel count not exceeding the request); each group is
// normalized over its channels and all columns, then scaled/shifted per
// channel by gamma/beta.
template <typename T>
Var group_norm(Tape<T>& t, Var x, std::size_t groups, Var gamma, Var beta, T eps = T(1e-5));
// W x + b; x is in_features x n.
template <typename T> Var linear(Tape<T>& t, Var weight, Var x, Var bias);
// Mean over columns of -log softmax(logits[:, j])[target[j]].
template <typename T>
Var softmax_cross_entropy(Tape<T>& t, Var logits, std::vector<std::int32_t> target);
// Stacks a over b along rows; column counts must agree.
template <typename T> Var concat_rows(Tape<T>& t, Var a, Var b);
template <typename T> Var reshape(Tape<T>& t, Var x, std::vector<std::size_t> shape);

std::size_t effective_groups(std::size_t channels, std::size_t requested);

}  // namespace ad
}  // namespace meshnet
