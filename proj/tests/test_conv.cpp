#include <doctest.h>

#include "sattn/checks/oracles.hpp"
#include "sattn/conv_attention.hpp"
#include "sattn/errors.hpp"
#include "sattn/gradcheck.hpp"

using namespace sattn;

namespace {

Matrix scalar_matrix(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

TEST_CASE("frozen 3x3 convolution with zero padding") {
  const double k[9] = {0.1, -0.2, 0.3, 0, 1, -0.5, 0.25, 0.5, -1};
  ConvParams params;
  for (double v : k) params.kernel.push_back(Tensor::parameter(scalar_matrix(v)));
  Matrix in(9, 1);
  for (Index i = 0; i < 9; ++i) in(i, 0) = static_cast<double>(i + 1);
  const Matrix y =
      regular_conv_forward(Tensor::constant(in), Layout::grid(3, 3), params, ConvKernelSpec::square(3)).value();
  const double want[9] = {-3, -2, 7.25, -2.6, -0.65, 12.1, 3.7, 4.7, 8.3};
  for (Index i = 0; i < 9; ++i) CHECK(y(i, 0) == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("kernel specs") {
  const ConvKernelSpec sq = ConvKernelSpec::square(3);
  CHECK(sq.size() == 9);
  CHECK(sq.center() == 4);
  CHECK(sq.offsets[0].dx == -1);
  CHECK(sq.offsets[0].dy == -1);
  CHECK(sq.offsets[1].dx == 0);
  const ConvKernelSpec line = ConvKernelSpec::line(5);
  CHECK(line.size() == 5);
  CHECK(line.center() == 2);
  CHECK_THROWS_AS(ConvKernelSpec::square(2), ContractError);
}

TEST_CASE("bilinear kernel") {
  CHECK(bilinear_g(1.25, 1.0) == doctest::Approx(0.75));
  CHECK(bilinear_g(0.0, 2.0) == 0.0);
  Matrix loc(1, 2);
  loc << 1.25, 0.5;
  const Matrix w = bilinear_weights(Tensor::constant(loc), Layout::grid(3, 3)).dense(9);
  CHECK(w(0, 1) == doctest::Approx(0.375));
  CHECK(w(0, 2) == doctest::Approx(0.125));
  CHECK(w(0, 4) == doctest::Approx(0.375));
  CHECK(w(0, 5) == doctest::Approx(0.125));
  CHECK(w.sum() == doctest::Approx(1.0));
}

TEST_CASE("regular weights are indicators, outside taps are empty") {
  const auto w = regular_conv_weights(Layout::sequence(4), ConvKernelSpec::line(3));
  REQUIRE(w.size() == 3);
  CHECK(w[0].keys(0, 0) == -1);
  CHECK(w[0].keys(2, 0) == 1);
  const Matrix d = w[2].dense(4);
  CHECK(d(0, 1) == 1.0);
  CHECK(d.row(3).sum() == 0.0);
}

TEST_CASE("zero offset predictors reduce deformable to regular convolution") {
  Rng rng(11);
  const ConvKernelSpec spec = ConvKernelSpec::square(3);
  const DeformableParams params = DeformableParams::init(spec, 3, 2, rng);
  const Layout l = Layout::grid(4, 3);
  const Tensor x = Tensor::constant(Matrix::Random(12, 3));
  const Matrix a = deformable_forward(x, l, params, spec).value();
  const Matrix b = regular_conv_forward(x, l, params.conv, spec).value();
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("deformable convolution matches the sliding-window oracle") {
  Rng rng(12);
  const ConvKernelSpec spec = ConvKernelSpec::square(3);
  DeformableParams params = DeformableParams::init(spec, 2, 2, rng);
  std::vector<Matrix> kernel, pred;
  for (Index t = 0; t < spec.size(); ++t) {
    params.offset_predictor[static_cast<std::size_t>(t)].mutable_value() = Matrix::Random(2, 2) * 0.4;
    kernel.push_back(params.conv.kernel[static_cast<std::size_t>(t)].value());
    pred.push_back(params.offset_predictor[static_cast<std::size_t>(t)].value());
  }
  const Matrix in = Matrix::Random(9, 2);
  const Matrix got = deformable_forward(Tensor::constant(in), Layout::grid(3, 3), params, spec).value();
  const Matrix want = oracle::deformable2d({3, 3, in}, kernel, pred, 3);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("deformable unit starts as the identity and has trainable offsets") {
  Rng rng(13);
  const ConvKernelSpec spec = ConvKernelSpec::line(3);
  DeformableParams params = DeformableParams::init(spec, 2, 2, rng, true);
  const Tensor x = Tensor::constant(Matrix::Random(5, 2));
  CHECK(deformable_unit_forward(x, Layout::sequence(5), params, spec).value().isApprox(x.value()));
  for (const Parameter& p : params.parameters()) {
    if (p.name.find("offset") != std::string::npos) {
      CHECK(p.lr_multiplier == doctest::Approx(DeformableParams::kOffsetLearningRateMultiplier));
    }
  }
}

TEST_CASE("deformable gradients match finite differences") {
  Rng rng(14);
  const ConvKernelSpec spec = ConvKernelSpec::line(3);
  DeformableParams params = DeformableParams::init(spec, 2, 2, rng);
  for (Tensor& w : params.offset_predictor) w.mutable_value() = Matrix::Constant(2, 1, 0.13);
  const Tensor x = Tensor::parameter(Matrix::Random(5, 2) * 0.7);
  const LossFn f = [&] {
    return cross_entropy(deformable_forward(x, Layout::sequence(5), params, spec), {0, 1, 1, 0, 1});
  };
  std::vector<Tensor> all = tensors_of(params.parameters());
  all.push_back(x);
  CHECK(finite_diff_check(f, all) < 1e-5);
}
