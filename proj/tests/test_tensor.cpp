#include <doctest.h>

#include <cmath>
#include <limits>

#include "sattn/errors.hpp"
#include "sattn/gradcheck.hpp"
#include "sattn/op_counter.hpp"
#include "sattn/params.hpp"
#include "sattn/rng.hpp"
#include "sattn/tensor.hpp"

using namespace sattn;

namespace {

Matrix mat(Index r, Index c, std::initializer_list<double> v) {
  Matrix m(r, c);
  Index i = 0;
  for (double x : v) m(i / c, i % c) = x, ++i;
  return m;
}

}  // namespace

TEST_CASE("matmul value and gradient") {
  Tensor a = Tensor::parameter(mat(2, 2, {1, 2, 3, 4}));
  Tensor b = Tensor::parameter(mat(2, 1, {5, 6}));
  Tensor y = matmul(a, b);
  CHECK(y.value()(0, 0) == doctest::Approx(17));
  CHECK(y.value()(1, 0) == doctest::Approx(39));
  backward(sum(y));
  CHECK(a.grad()(0, 0) == doctest::Approx(5));
  CHECK(a.grad()(1, 1) == doctest::Approx(6));
  CHECK(b.grad()(0, 0) == doctest::Approx(4));
  CHECK(b.grad()(1, 0) == doctest::Approx(6));
}

TEST_CASE("gradients accumulate until zeroed") {
  Tensor a = Tensor::parameter(mat(1, 1, {3}));
  backward(mul(a, a));
  backward(mul(a, a));
  CHECK(a.grad()(0, 0) == doctest::Approx(12));
  a.zero_grad();
  CHECK(a.grad()(0, 0) == 0.0);
}

TEST_CASE("shape mismatches throw DimensionError") {
  const Tensor a = Tensor::constant(Matrix::Zero(2, 3));
  const Tensor b = Tensor::constant(Matrix::Zero(2, 3));
  CHECK_THROWS_AS(matmul(a, b), DimensionError);
  CHECK_THROWS_AS(add(a, Tensor::constant(Matrix::Zero(3, 2))), DimensionError);
  CHECK_THROWS_AS(backward(a), ContractError);
}

TEST_CASE("masked softmax zeroes masked entries and normalises the rest") {
  Mask m(1, 3);
  m << true, false, true;
  const Matrix p = softmax(Tensor::constant(mat(1, 3, {0, 100, std::log(3.0)})), 1, m).value();
  CHECK(p(0, 1) == 0.0);
  CHECK(p(0, 0) == doctest::Approx(0.25));
  CHECK(p(0, 2) == doctest::Approx(0.75));
}

TEST_CASE("softmax error cases") {
  Mask none = Mask::Constant(1, 2, false);
  CHECK_THROWS_AS(softmax(Tensor::constant(Matrix::Zero(1, 2)), 1, none), DegenerateRegionError);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(softmax(Tensor::constant(mat(1, 2, {0, nan})), 1), NumericError);
}

TEST_CASE("softmax is stable for huge logits") {
  const Matrix p = softmax(Tensor::constant(mat(1, 2, {1000, 1000})), 1).value();
  CHECK(p(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("cross entropy of uniform logits is log of class count") {
  const Tensor l = cross_entropy(Tensor::constant(Matrix::Zero(2, 4)), {1, 3});
  CHECK(l.item() == doctest::Approx(std::log(4.0)));
}

TEST_CASE("op counter records products and respects scopes") {
  const Tensor a = Tensor::constant(Matrix::Ones(3, 4));
  const Tensor b = Tensor::constant(Matrix::Ones(4, 5));
  OpCounts outer;
  {
    CountScope s(outer);
    matmul(a, b);
    {
      NoCountScope quiet;
      matmul(a, b);
    }
    OpCounts inner;
    {
      CountScope t(inner);
      matmul_nt(a, a);
    }
    CHECK(inner.macs == 3 * 4 * 3);
  }
  CHECK(outer.macs == 3 * 4 * 5);
}

TEST_CASE("rng streams are reproducible") {
  Rng a(7), b(7);
  for (int i = 0; i < 5; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(7);
  std::vector<int> p = c.permutation(10);
  std::vector<int> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 10; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
  Rng d(1);
  for (int i = 0; i < 100; ++i) CHECK(d.below(3) < 3);
}

TEST_CASE("mt19937_64 first output for the default seed") {
  // value fixed by the C++ standard for seed 5489
  Rng r(5489);
  CHECK(r.next_u64() == 14514284786278117030ULL);
}

TEST_CASE("momentum sgd update") {
  Tensor p = Tensor::parameter(mat(1, 1, {1.0}));
  ParameterList params{{"p", p, 0.5}};
  MomentumSgd opt(0.1, 0.9);
  backward(scale(p, 2.0));
  opt.step(params);
  CHECK(p.value()(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5 * 2.0));
  CHECK(p.grad()(0, 0) == 0.0);
  backward(scale(p, 2.0));
  opt.step(params);
  CHECK(p.value()(0, 0) == doctest::Approx(0.9 - 0.1 * 0.5 * (0.9 * 2.0 + 2.0)));
}

TEST_CASE("gradient check of a composite expression") {
  Rng rng(3);
  Tensor w = init_parameter(3, 4, 4, rng);
  Tensor v = init_parameter(2, 3, 3, rng);
  const Tensor x = Tensor::constant(Matrix::Random(5, 4));
  const LossFn f = [&] {
    const Tensor h = sigmoid(matmul_nt(x, w));
    return cross_entropy(softmax(matmul_nt(h, v), 1), {0, 1, 1, 0, 1});
  };
  CHECK(finite_diff_check(f, {w, v}) < 1e-6);
}

TEST_CASE("relative error floor") {
  CHECK(max_relative_error({mat(1, 2, {0.0, 1.0})}, {mat(1, 2, {1e-9, 1.0})}) < 1e-4);
  CHECK(max_relative_error({mat(1, 1, {1.0})}, {mat(1, 1, {2.0})}) == doctest::Approx(0.5));
}
