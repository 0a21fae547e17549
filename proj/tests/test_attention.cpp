#include <doctest.h>

#include "sattn/attention.hpp"
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

Tensor p(Matrix m) { return Tensor::parameter(std::move(m)); }

// One head, C = d = 2, position width 2, 2 queries over 3 keys.
struct Fixture {
  AttentionConfig config;
  TransformerParams params;
  AttentionGeometry geometry;
  Tensor z = Tensor::constant(mat(2, 2, {1, 2, -1, 0.5}));
  Tensor x = Tensor::constant(mat(3, 2, {0.5, -1, 2, 0, -0.5, 1.5}));

  explicit Fixture(const std::string& beta) {
    config.heads = 1;
    config.model_dim = 2;
    config.beta = Beta::parse(beta);
    config.allow_uniform = true;
    params.query_embed = {p(mat(2, 2, {1, 0.5, -0.5, 1}))};
    params.key_embed = {p(mat(2, 2, {0.3, -0.2, 0.1, 0.4}))};
    params.position_embed = {p(mat(2, 2, {0.2, 0.1, -0.3, 0.5}))};
    params.key_bias = {p(mat(1, 2, {0.5, -1}))};
    params.position_bias = {p(mat(1, 2, {0.25, 0.75}))};
    params.value_proj = {p(mat(2, 2, {1, -1, 0.5, 2}))};
    params.output_proj = {p(mat(2, 2, {0.2, 0.3, -0.4, 0.1}))};
    geometry = AttentionGeometry::build(config, Layout::sequence(2), Layout::sequence(3), 2);
  }

  Matrix forward() const { return transformer_layer_forward(z, x, config, params, geometry, true).value(); }
};

void check_frozen(const std::string& beta, std::initializer_list<double> want) {
  CAPTURE(beta);
  const Matrix y = Fixture(beta).forward();
  Index i = 0;
  for (double w : want) {
    CHECK(y(i / 2, i % 2) == doctest::Approx(w).epsilon(1e-12));
    ++i;
  }
}

}  // namespace

// Frozen outputs computed independently in double precision.
TEST_CASE("frozen encoder-decoder outputs per beta") {
  check_frozen("1111", {0.2603267456388963, -0.7139708224664525, 0.23423801689431978, -0.39512871405551137});
  check_frozen("1000", {0.49441020299300836, -0.46405438357461626, 0.388164869700941, 0.43895743854241925});
  check_frozen("0100", {0.16829619494174716, -0.5037083842675707, 0.24204751549279893, -0.37093194586773276});
  check_frozen("0010", {0.18089839388622794, -0.48780896134395285, 0.18089839388622794, -0.48780896134395285});
  check_frozen("0001", {0.21950948835528733, -0.34390556719318505, 0.2939011453044429, -0.25172602772688846});
  check_frozen("0000", {0.3, -0.13333333333333328, 0.3, -0.13333333333333328});
}

TEST_CASE("key-content-only output does not depend on the query") {
  const Matrix y = Fixture("0010").forward();
  CHECK(y.row(0).isApprox(y.row(1)));
}

TEST_CASE("beta parsing and enumeration") {
  CHECK(Beta::parse("0110").str() == "0110");
  CHECK(Beta::parse("0110").term(2));
  CHECK_FALSE(Beta::parse("0110").term(1));
  CHECK_THROWS_AS(Beta::parse("011"), ContractError);
  CHECK_THROWS_AS(Beta::parse("01a0"), ContractError);
  const auto all = Beta::all();
  REQUIRE(all.size() == 16);
  CHECK(all.front().str() == "0000");
  CHECK(all.back().str() == "1111");
  CHECK(Beta::parse("0010").subset_of(Beta::parse("0011")));
  CHECK_FALSE(Beta::parse("1000").subset_of(Beta::parse("0011")));
}

TEST_CASE("configuration contracts") {
  AttentionConfig c;
  c.heads = 3;
  c.model_dim = 8;
  CHECK_THROWS_AS(c.validate(), ContractError);
  c.heads = 2;
  c.beta = Beta::parse("0000");
  CHECK_THROWS_AS(c.validate(), ContractError);
  c.allow_uniform = true;
  CHECK_NOTHROW(c.validate());
  c.region = Region::local(2);
  CHECK_THROWS_AS(c.validate(), ContractError);
}

TEST_CASE("local window restricts the support") {
  AttentionConfig c;
  c.heads = 1;
  c.model_dim = 4;
  c.region = Region::local(3);
  Rng rng(5);
  const TransformerParams params = TransformerParams::init(c, 4, rng, false);
  const Layout l = Layout::sequence(6);
  const AttentionGeometry g = AttentionGeometry::build(c, l, l, 4);
  const Tensor x = Tensor::constant(Matrix::Random(6, 4));
  const auto w = attention_weights(c, compute_energy_terms(c.beta, x, x, g.offsets, params), g.region_mask);
  for (Index q = 0; q < 6; ++q) {
    for (Index k = 0; k < 6; ++k) {
      if (std::abs(q - k) > 1) CHECK(w[0].value()(q, k) == 0.0);
    }
    CHECK(w[0].value().row(q).sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("gated residual starts as the identity") {
  AttentionConfig c;
  c.heads = 2;
  c.model_dim = 4;
  Rng rng(2);
  const TransformerParams params = TransformerParams::init(c, 4, rng, true);
  const Layout l = Layout::sequence(3);
  const AttentionGeometry g = AttentionGeometry::build(c, l, l, 4);
  const Tensor x = Tensor::constant(Matrix::Random(3, 4));
  const Matrix y = transformer_layer_forward(x, x, c, params, g, false, Placement::kGatedResidual).value();
  CHECK(y.isApprox(x.value()));
  CHECK_THROWS_AS(transformer_layer_forward(x, Tensor::constant(x.value()), c, params, g, false), ContractError);
}

TEST_CASE("attention gradients match finite differences on a grid") {
  AttentionConfig c;
  c.heads = 2;
  c.model_dim = 4;
  Rng rng(9);
  const TransformerParams params = TransformerParams::init(c, 4, rng, false);
  const Layout l = Layout::grid(2, 2);
  const AttentionGeometry g = AttentionGeometry::build(c, l, l, 4);
  const Tensor x = Tensor::parameter(Matrix::Random(4, 4));
  const LossFn f = [&] { return cross_entropy(transformer_layer_forward(x, x, c, params, g, false), {0, 1, 2, 3}); };
  std::vector<Tensor> all = tensors_of(params.parameters());
  all.push_back(x);
  CHECK(finite_diff_check(f, all) < 1e-6);
}
