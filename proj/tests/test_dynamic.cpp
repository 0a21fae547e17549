#include <doctest.h>

#include "sattn/dynamic_conv.hpp"
#include "sattn/errors.hpp"
#include "sattn/gradcheck.hpp"

using namespace sattn;

namespace {

Matrix mat(Index r, Index c, std::initializer_list<double> v) {
  Matrix m(r, c);
  Index i = 0;
  for (double x : v) m(i / c, i % c) = x, ++i;
  return m;
}

// GLU halves the input (A = I, B = 0), one group, 3 taps, identity point-wise.
DynamicConvParams frozen_params(bool renormalize) {
  DynamicConvParams p;
  p.in_channels = 2;
  p.out_channels = 2;
  p.groups = 1;
  p.spec = ConvKernelSpec::line(3);
  p.renormalize_at_border = renormalize;
  p.predictor = {Tensor::parameter(mat(2, 3, {0.2, -0.4, 0.6, 0.3, 0.1, -0.2}))};
  p.pointwise = Tensor::parameter(Matrix::Identity(2, 2));
  p.gating.linear = Tensor::parameter(Matrix::Identity(2, 2));
  p.gating.linear_bias = Tensor::parameter(Matrix::Zero(1, 2));
  p.gating.gate = Tensor::parameter(Matrix::Zero(2, 2));
  p.gating.gate_bias = Tensor::parameter(Matrix::Zero(1, 2));
  return p;
}

const Matrix kInput = mat(3, 2, {1, -1, 0.5, 2, -1.5, 0.25});

void check_rows(const Matrix& y, std::initializer_list<double> want) {
  Index i = 0;
  for (double w : want) {
    CHECK(y(i / 2, i % 2) == doctest::Approx(w).epsilon(1e-12));
    ++i;
  }
}

}  // namespace

// Frozen outputs computed independently in double precision.
TEST_CASE("frozen dynamic convolution, outside taps dropped") {
  const Matrix y = dynamic_forward(Tensor::constant(kInput), Layout::sequence(3), frozen_params(false)).value();
  check_rows(y, {0.23662039054348033, 0.3421706869299728, 0.07302374475776824, 0.12146404516696177,
                 -0.27815406450718405, 0.36930388105370415});
}

TEST_CASE("frozen dynamic convolution, kernel renormalised at the border") {
  const Matrix y = dynamic_forward(Tensor::constant(kInput), Layout::sequence(3), frozen_params(true)).value();
  check_rows(y, {0.3357473843316253, 0.4855156940102482, 0.07302374475776824, 0.12146404516696177,
                 -0.35467908471400933, 0.4709058008752418});
}

TEST_CASE("group assignment") {
  CHECK(group_of_channel(1, 8, 4) == 1);
  CHECK(group_of_channel(2, 8, 4) == 1);
  CHECK(group_of_channel(3, 8, 4) == 2);
  CHECK(group_of_channel(8, 8, 4) == 4);
  CHECK(group_of_channel(5, 8, 1) == 1);
  CHECK_THROWS_AS(group_of_channel(0, 8, 4), ContractError);
  CHECK_THROWS_AS(group_of_channel(9, 8, 4), ContractError);
  CHECK_THROWS_AS(group_of_channel(1, 8, 3), ContractError);
}

TEST_CASE("kernels are normalised and shared within a group") {
  Rng rng(4);
  const DynamicConvParams p = DynamicConvParams::init(ConvKernelSpec::square(3), 8, 8, 2, rng);
  const Tensor x = Tensor::constant(Matrix::Random(12, 8));
  const auto k = dynamic_kernel(x, p);
  REQUIRE(k.size() == 2);
  for (const Tensor& t : k) {
    CHECK(t.rows() == 12);
    CHECK(t.cols() == 9);
    CHECK(((t.value().rowwise().sum().array() - 1.0).abs() < 1e-12).all());
  }
  const Layout l = Layout::grid(3, 4);
  const Matrix a = dynamic_weights(5, k, l, p);
  CHECK(a.rows() == 8);
  CHECK(a.cols() == 12);
  CHECK(a.row(0).isApprox(a.row(3)));
  CHECK(a.row(4).isApprox(a.row(7)));
}

TEST_CASE("dynamic convolution gradients match finite differences") {
  Rng rng(6);
  const DynamicConvParams p = DynamicConvParams::init(ConvKernelSpec::line(3), 4, 4, 2, rng);
  const Tensor x = Tensor::parameter(Matrix::Random(5, 4));
  const LossFn f = [&] { return cross_entropy(dynamic_forward(x, Layout::sequence(5), p), {0, 1, 2, 3, 0}); };
  std::vector<Tensor> all = tensors_of(p.parameters());
  all.push_back(x);
  CHECK(finite_diff_check(f, all) < 1e-6);
}
