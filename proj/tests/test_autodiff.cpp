#include <cmath>
#include <random>

#include "doctest.h"
#include "meshnet/adam.hpp"
#include "meshnet/autodiff.hpp"
#include "meshnet/error.hpp"
#include "support.hpp"

using namespace meshnet;
using testing::max_gradient_error;
using testing::random_tensor;
using T3 = Tape<double>;
using Vs = std::vector<Var>;

namespace {

constexpr double kTol = 1e-4;

// Values kept away from the ReLU kink so differences stay one-sided.
Tensor<double> off_kink(std::vector<std::size_t> shape, std::mt19937_64& rng) {
  auto t = random_tensor(std::move(shape), rng, 0.1, 1.0);
  std::bernoulli_distribution neg(0.5);
  for (auto& v : t.data())
    if (neg(rng)) v = -v;
  return t;
}

}  // namespace

TEST_CASE("gradient: matmul, add, scale, add_bias") {
  std::mt19937_64 rng(1);
  CHECK(max_gradient_error([](T3& t, const Vs& v) { return ad::matmul(t, v[0], v[1]); },
                           {random_tensor({3, 4}, rng), random_tensor({4, 5}, rng)}) < kTol);
  CHECK(max_gradient_error([](T3& t, const Vs& v) { return ad::add(t, v[0], v[1]); },
                           {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)}) < kTol);
  CHECK(max_gradient_error([](T3& t, const Vs& v) { return ad::scale(t, v[0], -2.5); },
                           {random_tensor({3, 4}, rng)}) < kTol);
  CHECK(max_gradient_error([](T3& t, const Vs& v) { return ad::add_bias(t, v[0], v[1]); },
                           {random_tensor({3, 4}, rng), random_tensor({3}, rng)}) < kTol);
}

TEST_CASE("gradient: relu, sum, reshape, concat") {
  std::mt19937_64 rng(2);
  CHECK(max_gradient_error([](T3& t, const Vs& v) { return ad::relu(t, v[0]); }, {off_kink({4, 6}, rng)}) < kTol);
  CHECK(max_gradient_error([](T3& t, const Vs& v) { return ad::sum(t, v[0]); }, {random_tensor({4, 6}, rng)}) <
        kTol);
  CHECK(max_gradient_error([](T3& t, const Vs& v) { return ad::reshape(t, v[0], {6, 4}); },
                           {random_tensor({4, 6}, rng)}) < kTol);
  CHECK(max_gradient_error([](T3& t, const Vs& v) { return ad::concat_rows(t, v[0], v[1]); },
                           {random_tensor({2, 5}, rng), random_tensor({3, 5}, rng)}) < kTol);
}

TEST_CASE("gradient: gather, scatter mean, axis means") {
  std::mt19937_64 rng(3);
  std::vector<std::int32_t> index{0, 3, 3, 5, 1, 2, 5};  // 5 = sentinel for 5 columns
  CHECK(max_gradient_error([&](T3& t, const Vs& v) { return ad::gather_cols(t, v[0], index); },
                           {random_tensor({3, 5}, rng)}) < kTol);
  std::vector<std::int32_t> group{2, 0, 0, 1, 2, 2};
  CHECK(max_gradient_error([&](T3& t, const Vs& v) { return ad::scatter_mean_cols(t, v[0], group, 3); },
                           {random_tensor({3, 6}, rng)}) < kTol);
  CHECK(max_gradient_error([](T3& t, const Vs& v) { return ad::mean_over_axis(t, v[0], 0); },
                           {random_tensor({3, 6}, rng)}) < kTol);
  CHECK(max_gradient_error([](T3& t, const Vs& v) { return ad::mean_over_axis(t, v[0], 1); },
                           {random_tensor({3, 6}, rng)}) < kTol);
}

TEST_CASE("gradient: group norm, linear, cross entropy") {
  std::mt19937_64 rng(4);
  CHECK(max_gradient_error(
            [](T3& t, const Vs& v) { return ad::group_norm(t, v[0], 3, v[1], v[2]); },
            {random_tensor({6, 7}, rng), random_tensor({6}, rng, 0.5, 1.5), random_tensor({6}, rng)}) < kTol);
  CHECK(max_gradient_error([](T3& t, const Vs& v) { return ad::linear(t, v[0], v[1], v[2]); },
                           {random_tensor({4, 3}, rng), random_tensor({3, 5}, rng), random_tensor({4}, rng)}) <
        kTol);
  std::vector<std::int32_t> target{0, 2, 1, 2};
  CHECK(max_gradient_error([&](T3& t, const Vs& v) { return ad::softmax_cross_entropy(t, v[0], target); },
                           {random_tensor({3, 4}, rng, -3, 3)}) < kTol);
}

TEST_CASE("cross entropy matches log-sum-exp by hand") {
  Tape<double> t;
  const Var x = t.variable(Tensor<double>({2, 2}, std::vector<double>{1, 0, 2, 3}));
  const Var l = ad::softmax_cross_entropy(t, x, {1, 0});
  const double c0 = -(2 - std::log(std::exp(1) + std::exp(2)));
  const double c1 = -(0 - std::log(std::exp(0) + std::exp(3)));
  CHECK(t.value(l)[0] == doctest::Approx((c0 + c1) / 2).epsilon(1e-12));
}

TEST_CASE("group norm: groups and normalization") {
  CHECK(ad::effective_groups(30, 16) == 15);
  CHECK(ad::effective_groups(32, 16) == 16);
  CHECK(ad::effective_groups(5, 16) == 5);
  CHECK(ad::effective_groups(7, 4) == 1);

  std::mt19937_64 rng(5);
  Tape<double> t;
  const Var x = t.variable(random_tensor({4, 50}, rng, -5, 9));
  const Var g = t.constant(Tensor<double>({4}, 1.0));
  const Var b = t.constant(Tensor<double>({4}, 0.0));
  const auto& y = t.value(ad::group_norm(t, x, 2, g, b));
  for (int grp = 0; grp < 2; ++grp) {
    double s = 0, s2 = 0;
    for (std::size_t r = 2 * grp; r < 2u * grp + 2; ++r)
      for (std::size_t c = 0; c < 50; ++c) s += y(r, c), s2 += y(r, c) * y(r, c);
    CHECK(s / 100 == doctest::Approx(0).epsilon(1e-9));
    CHECK(s2 / 100 == doctest::Approx(1).epsilon(1e-4));
  }
}

TEST_CASE("tape: shapes, non-finite values and gradient bookkeeping") {
  Tape<double> t;
  const Var a = t.variable(Tensor<double>::matrix(2, 3, 1.0));
  const Var b = t.variable(Tensor<double>::matrix(2, 3, 1.0));
  CHECK_THROWS_AS(ad::matmul(t, a, b), ShapeError);
  CHECK_THROWS_AS(ad::reshape(t, a, {4}), ShapeError);
  const Var big = t.variable(Tensor<double>::matrix(1, 1, 1e300));
  CHECK_THROWS_AS(ad::scale(t, big, 1e300), NumericError);

  Tape<double> u;
  const Var x = u.variable(Tensor<double>({2}, std::vector<double>{1, 2}));
  const Var k = u.constant(Tensor<double>({2}, std::vector<double>{3, 4}));
  const Var y = ad::sum(u, ad::add(u, x, ad::add(u, x, k)));
  u.backward(y);
  CHECK(u.grad(x)[0] == 2);
  CHECK(u.grad(x)[1] == 2);
  CHECK_FALSE(u.requires_grad(k));
}

TEST_CASE("parameter gradients accumulate by slot") {
  Parameter<double> w{"w", Tensor<double>({2}, std::vector<double>{1, 2})};
  std::vector<Tensor<double>> grads{Tensor<double>({2}, 0.0)};
  for (int pass = 0; pass < 2; ++pass) {
    Tape<double> t;
    const Var p = t.parameter(w, 0);
    const Var y = ad::sum(t, ad::scale(t, p, 3.0));
    t.backward(y);
    t.accumulate_parameter_grads(grads);
  }
  CHECK(grads[0][0] == 6);
  CHECK(grads[0][1] == 6);
}

TEST_CASE("adam: first step moves by lr * g / (|g| + eps)") {
  std::vector<Parameter<double>> params{{"p", Tensor<double>({3}, std::vector<double>{1, -1, 0.5})}};
  std::vector<Tensor<double>> grads{Tensor<double>({3}, std::vector<double>{0.3, -2, 0})};
  AdamState<double> s;
  s.lr = 0.01;
  adam_step<double>(params, grads, s);
  CHECK(s.step == 1);
  const double expect[3] = {1 - 0.01 * 0.3 / (0.3 + 1e-8), -1 + 0.01 * 2 / (2 + 1e-8), 0.5};
  for (int i = 0; i < 3; ++i) CHECK(params[0].value[i] == doctest::Approx(expect[i]).epsilon(1e-12));

  // Second step with the same gradient: bias-corrected moments equal g and g^2.
  adam_step<double>(params, grads, s);
  CHECK(params[0].value[0] == doctest::Approx(1 - 2 * 0.01 * 0.3 / (0.3 + 1e-8)).epsilon(1e-9));
}

TEST_CASE("adam minimizes a quadratic") {
  std::vector<Parameter<double>> params{{"p", Tensor<double>({2}, std::vector<double>{3, -4})}};
  AdamState<double> s;
  s.lr = 0.05;
  for (int i = 0; i < 2000; ++i) {
    std::vector<Tensor<double>> g{Tensor<double>({2}, std::vector<double>{2 * params[0].value[0], 2 * params[0].value[1]})};
    adam_step<double>(params, g, s);
  }
  CHECK(std::abs(params[0].value[0]) < 1e-2);
  CHECK(std::abs(params[0].value[1]) < 1e-2);
}
