#include "meshnet/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>

#include "meshnet/error.hpp"

namespace meshnet {
namespace {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<RowMajor<T>>;
template <typename T>
using CMapM = Eigen::Map<const RowMajor<T>>;

template <typename T>
CMapM<T> as_matrix(const Tensor<T>& t) {
  return CMapM<T>(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
MapM<T> as_matrix(Tensor<T>& t) {
  return MapM<T>(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

template <typename T>
std::string sh(const Tensor<T>& t) {
  return shape_string(t.shape());
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape

template <typename T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
  if (v.id >= nodes_.size()) throw ShapeError("invalid tape variable");
  return nodes_[v.id];
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  if (v.id >= nodes_.size()) throw ShapeError("invalid tape variable");
  return nodes_[v.id];
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::variable(Tensor<T> value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::parameter(const Parameter<T>& param, std::size_t slot) {
  Node n;
  n.external = &param.value;
  n.requires_grad = true;
  n.param_slot = slot;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::record(std::string_view op, Tensor<T> value, std::initializer_list<Var> inputs,
                    BackwardFn fn) {
  if (!value.all_finite()) {
    throw NumericError(std::string(op) + " produced a non-finite value");
  }
  Node n;
  n.owned = std::move(value);
  for (auto in : inputs) n.requires_grad = n.requires_grad || node(in).requires_grad;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  return node(v).value();
}

template <typename T>
bool Tape<T>::requires_grad(Var v) const {
  return node(v).requires_grad;
}

template <typename T>
Tensor<T> Tape<T>::grad(Var v) const {
  const auto& n = node(v);
  if (n.has_grad) return n.grad;
  return Tensor<T>(n.value().shape(), T{0});
}

template <typename T>
Tensor<T>* Tape<T>::grad_sink(Var v) {
  auto& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor<T>(n.value().shape(), T{0});
    n.has_grad = true;
  }
  return &n.grad;
}

template <typename T>
void Tape<T>::backward(Var loss) {
  auto& root = node(loss);
  if (root.value().size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " + sh(root.value()));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor<T>();
  }
  if (!root.requires_grad) return;
  grad_sink(loss)->data()[0] = T{1};
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    // Closures only write to the grads of earlier nodes, so n.grad is stable.
    n.backward(*this, n.grad);
  }
}

template <typename T>
void Tape<T>::accumulate_parameter_grads(std::span<Tensor<T>> grads) const {
  for (const auto& n : nodes_) {
    if (n.param_slot == Var::kInvalid || !n.has_grad) continue;
    auto& dst = grads[n.param_slot];
    if (dst.size() != n.grad.size()) dst = Tensor<T>(n.grad.shape(), T{0});
    auto d = dst.data();
    auto s = n.grad.data();
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
  }
}

template class Tape<float>;
template class Tape<double>;

// ---------------------------------------------------------------------------
// Ops

namespace ad {

std::size_t effective_groups(std::size_t channels, std::size_t requested) {
  std::size_t g = std::max<std::size_t>(1, std::min(requested, channels));
  while (channels % g != 0) --g;
  return g;
}

template <typename T>
Var matmul(Tape<T>& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  require(A.rank() == 2 && B.rank() == 2 && A.cols() == B.rows(),
          "matmul: incompatible shapes " + sh(A) + " and " + sh(B));
  Tensor<T> out = Tensor<T>::matrix(A.rows(), B.cols());
  as_matrix(out).noalias() = as_matrix(A) * as_matrix(B);
  return t.record("matmul", std::move(out), {a, b}, [a, b](Tape<T>& tp, const Tensor<T>& g) {
    if (auto* ga = tp.grad_sink(a)) as_matrix(*ga).noalias() += as_matrix(g) * as_matrix(tp.value(b)).transpose();
    if (auto* gb = tp.grad_sink(b)) as_matrix(*gb).noalias() += as_matrix(tp.value(a)).transpose() * as_matrix(g);
  });
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  require(A.shape() == B.shape(), "add: shape mismatch " + sh(A) + " vs " + sh(B));
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  return t.record("add", std::move(out), {a, b}, [a, b](Tape<T>& tp, const Tensor<T>& g) {
    for (Var v : {a, b}) {
      if (auto* gv = tp.grad_sink(v))
        for (std::size_t i = 0; i < g.size(); ++i) (*gv)[i] += g[i];
    }
  });
}

template <typename T>
Var scale(Tape<T>& t, Var a, T factor) {
  Tensor<T> out = t.value(a);
  for (auto& v : out.data()) v *= factor;
  return t.record("scale", std::move(out), {a}, [a, factor](Tape<T>& tp, const Tensor<T>& g) {
    if (auto* ga = tp.grad_sink(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += factor * g[i];
  });
}

template <typename T>
Var add_bias(Tape<T>& t, Var x, Var bias) {
  const auto& X = t.value(x);
  const auto& B = t.value(bias);
  require(B.size() == X.rows(), "add_bias: bias of " + std::to_string(B.size()) + " for " + sh(X));
  Tensor<T> out = X;
  const auto cols = X.cols();
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) += B[r];
  return t.record("add_bias", std::move(out), {x, bias}, [x, bias](Tape<T>& tp, const Tensor<T>& g) {
    if (auto* gx = tp.grad_sink(x))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    if (auto* gb = tp.grad_sink(bias)) {
      const auto cols = g.cols();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        T s{0};
        for (std::size_t c = 0; c < cols; ++c) s += g(r, c);
        (*gb)[r] += s;
      }
    }
  });
}

template <typename T>
Var relu(Tape<T>& t, Var x) {
  Tensor<T> out = t.value(x);
  for (auto& v : out.data()) v = v > T{0} ? v : T{0};
  return t.record("relu", std::move(out), {x}, [x](Tape<T>& tp, const Tensor<T>& g) {
    if (auto* gx = tp.grad_sink(x)) {
      const auto& X = tp.value(x);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (X[i] > T{0}) (*gx)[i] += g[i];
    }
  });
}

template <typename T>
Var sum(Tape<T>& t, Var x) {
  const auto& X = t.value(x);
  double s = 0.0;
  for (auto v : X.data()) s += v;
  Tensor<T> out({1}, static_cast<T>(s));
  return t.record("sum", std::move(out), {x}, [x](Tape<T>& tp, const Tensor<T>& g) {
    if (auto* gx = tp.grad_sink(x))
      for (auto& v : gx->data()) v += g[0];
  });
}

template <typename T>
Var gather_cols(Tape<T>& t, Var x, std::vector<std::int32_t> index) {
  const auto& X = t.value(x);
  require(X.rank() == 2, "gather_cols: rank-2 input required, got " + sh(X));
  const auto rows = X.rows();
  const auto in_cols = static_cast<std::int32_t>(X.cols());
  for (auto j : index) require(j >= 0 && j <= in_cols, "gather_cols: index out of range");
  Tensor<T> out = Tensor<T>::matrix(rows, index.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto src = X.row(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < index.size(); ++j) dst[j] = index[j] == in_cols ? T{0} : src[index[j]];
  }
  return t.record("gather_cols", std::move(out), {x},
                  [x, index = std::move(index), in_cols](Tape<T>& tp, const Tensor<T>& g) {
                    auto* gx = tp.grad_sink(x);
                    if (!gx) return;
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      const auto src = g.row(r);
                      auto dst = gx->row(r);
                      for (std::size_t j = 0; j < index.size(); ++j)
                        if (index[j] != in_cols) dst[index[j]] += src[j];
                    }
                  });
}

template <typename T>
Var scatter_mean_cols(Tape<T>& t, Var x, std::vector<std::int32_t> group, std::size_t num_groups) {
  const auto& X = t.value(x);
  require(X.rank() == 2 && group.size() == X.cols(), "scatter_mean_cols: one group id per column required");
  std::vector<std::size_t> count(num_groups, 0);
  for (auto gid : group) {
    require(gid >= 0 && static_cast<std::size_t>(gid) < num_groups, "scatter_mean_cols: group id out of range");
    ++count[gid];
  }
  Tensor<T> out = Tensor<T>::matrix(X.rows(), num_groups);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto src = X.row(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < group.size(); ++j) dst[group[j]] += src[j];
    for (std::size_t k = 0; k < num_groups; ++k)
      if (count[k]) dst[k] /= static_cast<T>(count[k]);
  }
  return t.record("scatter_mean_cols", std::move(out), {x},
                  [x, group = std::move(group), count = std::move(count)](Tape<T>& tp, const Tensor<T>& g) {
                    auto* gx = tp.grad_sink(x);
                    if (!gx) return;
                    for (std::size_t r = 0; r < g.rows(); ++r) {
                      const auto src = g.row(r);
                      auto dst = gx->row(r);
                      for (std::size_t j = 0; j < group.size(); ++j)
                        dst[j] += src[group[j]] / static_cast<T>(count[group[j]]);
                    }
                  });
}

template <typename T>
Var mean_over_axis(Tape<T>& t, Var x, int axis) {
  const auto& X = t.value(x);
  require(X.rank() == 2 && (axis == 0 || axis == 1), "mean_over_axis: rank-2 input and axis 0/1 required");
  const auto rows = X.rows(), cols = X.cols();
  Tensor<T> out = axis == 1 ? Tensor<T>::matrix(rows, 1) : Tensor<T>::matrix(1, cols);
  if (axis == 1) {
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (auto v : X.row(r)) s += v;
      out[r] = static_cast<T>(s / static_cast<double>(cols));
    }
  } else {
    std::vector<double> acc(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) acc[c] += X(r, c);
    for (std::size_t c = 0; c < cols; ++c) out[c] = static_cast<T>(acc[c] / static_cast<double>(rows));
  }
  return t.record("mean_over_axis", std::move(out), {x}, [x, axis, rows, cols](Tape<T>& tp, const Tensor<T>& g) {
    auto* gx = tp.grad_sink(x);
    if (!gx) return;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        (*gx)(r, c) += axis == 1 ? g[r] / static_cast<T>(cols) : g[c] / static_cast<T>(rows);
  });
}

template <typename T>
Var group_norm(Tape<T>& t, Var x, std::size_t groups, Var gamma, Var beta, T eps) {
  const auto& X = t.value(x);
  const auto& G = t.value(gamma);
  const auto& B = t.value(beta);
  require(X.rank() == 2, "group_norm: rank-2 input required, got " + sh(X));
  const auto C = X.rows(), N = X.cols();
  require(G.size() == C && B.size() == C, "group_norm: gamma/beta must have one entry per channel");
  const auto g = effective_groups(C, groups);
  const auto per = C / g;
  const auto count = static_cast<double>(per * N);

  Tensor<T> xhat = Tensor<T>::matrix(C, N);
  std::vector<T> inv_std(g);
  for (std::size_t k = 0; k < g; ++k) {
    double s = 0.0;
    for (std::size_t c = k * per; c < (k + 1) * per; ++c)
      for (auto v : X.row(c)) s += v;
    const double mean = s / count;
    double ss = 0.0;
    for (std::size_t c = k * per; c < (k + 1) * per; ++c)
      for (auto v : X.row(c)) ss += (v - mean) * (v - mean);
    const double istd = 1.0 / std::sqrt(ss / count + static_cast<double>(eps));
    inv_std[k] = static_cast<T>(istd);
    for (std::size_t c = k * per; c < (k + 1) * per; ++c) {
      const auto src = X.row(c);
      auto dst = xhat.row(c);
      for (std::size_t n = 0; n < N; ++n) dst[n] = static_cast<T>((src[n] - mean) * istd);
    }
  }
  Tensor<T> out = Tensor<T>::matrix(C, N);
  for (std::size_t c = 0; c < C; ++c) {
    const auto src = xhat.row(c);
    auto dst = out.row(c);
    for (std::size_t n = 0; n < N; ++n) dst[n] = G[c] * src[n] + B[c];
  }
  return t.record(
      "group_norm", std::move(out), {x, gamma, beta},
      [x, gamma, beta, g, per, C, N, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape<T>& tp, const Tensor<T>& grad) {
        if (auto* gb = tp.grad_sink(beta)) {
          for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (auto v : grad.row(c)) s += v;
            (*gb)[c] += static_cast<T>(s);
          }
        }
        if (auto* gg = tp.grad_sink(gamma)) {
          for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            const auto gr = grad.row(c);
            const auto xr = xhat.row(c);
            for (std::size_t n = 0; n < N; ++n) s += static_cast<double>(gr[n]) * xr[n];
            (*gg)[c] += static_cast<T>(s);
          }
        }
        auto* gx = tp.grad_sink(x);
        if (!gx) return;
        const auto& Gm = tp.value(gamma);
        const double M = static_cast<double>(per * N);
        for (std::size_t k = 0; k < g; ++k) {
          double sum_d = 0.0, sum_dx = 0.0;
          for (std::size_t c = k * per; c < (k + 1) * per; ++c) {
            const auto gr = grad.row(c);
            const auto xr = xhat.row(c);
            for (std::size_t n = 0; n < N; ++n) {
              const double d = static_cast<double>(gr[n]) * Gm[c];
              sum_d += d;
              sum_dx += d * xr[n];
            }
          }
          const double scale = static_cast<double>(inv_std[k]) / M;
          for (std::size_t c = k * per; c < (k + 1) * per; ++c) {
            const auto gr = grad.row(c);
            const auto xr = xhat.row(c);
            auto dst = gx->row(c);
            for (std::size_t n = 0; n < N; ++n) {
              const double d = static_cast<double>(gr[n]) * Gm[c];
              dst[n] += static_cast<T>(scale * (M * d - sum_d - xr[n] * sum_dx));
            }
          }
        }
      });
}

template <typename T>
Var linear(Tape<T>& t, Var weight, Var x, Var bias) {
  return add_bias(t, matmul(t, weight, x), bias);
}

template <typename T>
Var softmax_cross_entropy(Tape<T>& t, Var logits, std::vector<std::int32_t> target) {
  const auto& L = t.value(logits);
  require(L.rank() == 2 && target.size() == L.cols(),
          "softmax_cross_entropy: need one target per column of " + sh(L));
  const auto K = L.rows(), N = L.cols();
  Tensor<T> prob = Tensor<T>::matrix(K, N);
  double loss = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    require(target[n] >= 0 && static_cast<std::size_t>(target[n]) < K, "softmax_cross_entropy: target out of range");
    double mx = L(0, n);
    for (std::size_t k = 1; k < K; ++k) mx = std::max<double>(mx, L(k, n));
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) z += std::exp(static_cast<double>(L(k, n)) - mx);
    for (std::size_t k = 0; k < K; ++k) prob(k, n) = static_cast<T>(std::exp(static_cast<double>(L(k, n)) - mx) / z);
    loss += std::log(z) + mx - static_cast<double>(L(static_cast<std::size_t>(target[n]), n));
  }
  Tensor<T> out({1}, static_cast<T>(loss / static_cast<double>(N)));
  return t.record("softmax_cross_entropy", std::move(out), {logits},
                  [logits, target = std::move(target), prob = std::move(prob), K, N](Tape<T>& tp, const Tensor<T>& g) {
                    auto* gl = tp.grad_sink(logits);
                    if (!gl) return;
                    const T w = g[0] / static_cast<T>(N);
                    for (std::size_t n = 0; n < N; ++n)
                      for (std::size_t k = 0; k < K; ++k)
                        (*gl)(k, n) += w * (prob(k, n) - (static_cast<std::int32_t>(k) == target[n] ? T{1} : T{0}));
                  });
}

template <typename T>
Var concat_rows(Tape<T>& t, Var a, Var b) {
  const auto& A = t.value(a);
  const auto& B = t.value(b);
  require(A.rank() == 2 && B.rank() == 2 && A.cols() == B.cols(),
          "concat_rows: column mismatch " + sh(A) + " vs " + sh(B));
  Tensor<T> out = Tensor<T>::matrix(A.rows() + B.rows(), A.cols());
  std::copy(A.data().begin(), A.data().end(), out.data().begin());
  std::copy(B.data().begin(), B.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(A.size()));
  const auto split = A.size();
  return t.record("concat_rows", std::move(out), {a, b}, [a, b, split](Tape<T>& tp, const Tensor<T>& g) {
    if (auto* ga = tp.grad_sink(a))
      for (std::size_t i = 0; i < split; ++i) (*ga)[i] += g[i];
    if (auto* gb = tp.grad_sink(b))
      for (std::size_t i = split; i < g.size(); ++i) (*gb)[i - split] += g[i];
  });
}

template <typename T>
Var reshape(Tape<T>& t, Var x, std::vector<std::size_t> shape) {
  Tensor<T> out = t.value(x).reshaped(std::move(shape));
  return t.record("reshape", std::move(out), {x}, [x](Tape<T>& tp, const Tensor<T>& g) {
    if (auto* gx = tp.grad_sink(x))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  });
}

#define MESHNET_INSTANTIATE_OPS(T)                                                                 \
  template Var matmul<T>(Tape<T>&, Var, Var);                                                      \
  template Var add<T>(Tape<T>&, Var, Var);                                                         \
  template Var scale<T>(Tape<T>&, Var, T);                                                         \
  template Var add_bias<T>(Tape<T>&, Var, Var);                                                    \
  template Var relu<T>(Tape<T>&, Var);                                                             \
  template Var sum<T>(Tape<T>&, Var);                                                              \
  template Var gather_cols<T>(Tape<T>&, Var, std::vector<std::int32_t>);                          \
  template Var scatter_mean_cols<T>(Tape<T>&, Var, std::vector<std::int32_t>, std::size_t);       \
  template Var mean_over_axis<T>(Tape<T>&, Var, int);                                              \
  template Var group_norm<T>(Tape<T>&, Var, std::size_t, Var, Var, T);                             \
  template Var linear<T>(Tape<T>&, Var, Var, Var);                                                 \
  template Var softmax_cross_entropy<T>(Tape<T>&, Var, std::vector<std::int32_t>);                \
  template Var concat_rows<T>(Tape<T>&, Var, Var);                                                 \
  template Var reshape<T>(Tape<T>&, Var, std::vector<std::size_t>);

MESHNET_INSTANTIATE_OPS(float)
MESHNET_INSTANTIATE_OPS(double)

#undef MESHNET_INSTANTIATE_OPS

}  // namespace ad
}  // namespace meshnet
