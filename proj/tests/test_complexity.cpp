#include <doctest.h>

#include <sstream>

#include "sattn/complexity.hpp"
#include "sattn/conv_attention.hpp"
#include "sattn/dynamic_conv.hpp"
#include "sattn/errors.hpp"

using namespace sattn;

// Counts worked out by hand for a 4-token sequence, C = 2, M = 1, position
// width 2 (7 distinct offsets).
TEST_CASE("hand-counted MACs for a tiny sequence") {
  const CostShape s = CostShape::sequence(4, 2, 3, 1, 1);
  CHECK(s.offsets() == 7);
  CHECK(count_term(Term::kE1, s).total() == 64);
  CHECK(count_term(Term::kE2, s).total() == 76);
  CHECK(count_term(Term::kE3, s).total() == 24);
  CHECK(count_term(Term::kE4, s).total() == 60);
  CHECK(count_aggregation(s) == 64);
  CHECK(count_transformer(Beta::full(), s) == 228);
  CHECK(count_mechanism(Mechanism::kRegular, s) == 72);
  CHECK(count_mechanism(Mechanism::kDeformable, s) == 120);
  CHECK(count_mechanism(Mechanism::kDynamic, s) == 104);
}

TEST_CASE("closed forms equal instrumented counts") {
  Rng rng(1);
  for (const Beta& beta : Beta::all()) {
    CAPTURE(beta.str());
    for (const Layout& l : {Layout::sequence(5), Layout::grid(2, 3)}) {
      AttentionConfig c;
      c.heads = 2;
      c.model_dim = 8;
      c.beta = beta;
      c.allow_uniform = true;
      const TransformerParams params = TransformerParams::init(c, 8, rng, true);
      const AttentionGeometry g = AttentionGeometry::build(c, l, l, 8);
      const Tensor x = Tensor::constant(Matrix::Random(l.count(), 8));
      CostShape s;
      s.layout = l;
      s.channels = 8;
      s.heads = 2;
      for (Placement pl : {Placement::kPlain, Placement::kGatedResidual}) {
        const OpCounts got = measure([&] { transformer_layer_forward(x, x, c, params, g, false, pl); });
        CHECK(got.macs == count_transformer(beta, s, pl));
      }
    }
  }
  const ConvKernelSpec spec = ConvKernelSpec::square(3);
  const Layout l = Layout::grid(3, 4);
  const Tensor x = Tensor::constant(Matrix::Random(12, 4));
  const CostShape s = CostShape::grid(3, 4, 4, 3, 2, 2);
  const DeformableParams dp = DeformableParams::init(spec, 4, 4, rng);
  CHECK(measure([&] { regular_conv_forward(x, l, dp.conv, spec); }).macs == count_mechanism(Mechanism::kRegular, s));
  CHECK(measure([&] { deformable_forward(x, l, dp, spec); }).macs == count_mechanism(Mechanism::kDeformable, s));
  const DynamicConvParams yp = DynamicConvParams::init(spec, 4, 4, 2, rng);
  CHECK(measure([&] { dynamic_forward(x, l, yp); }).macs == count_mechanism(Mechanism::kDynamic, s));
}

TEST_CASE("factor flags") {
  CHECK(factor_flags(Mechanism::kTransformer, Term::kE3).key_content);
  CHECK_FALSE(factor_flags(Mechanism::kTransformer, Term::kE3).query_content);
  CHECK(factor_flags(Mechanism::kTransformer, Term::kE4).relative_position);
  CHECK(factor_flags(Mechanism::kTransformer).spatial == "dense-global");
  CHECK(factor_flags(Mechanism::kRegular).spatial == "sparse-local");
  CHECK_FALSE(factor_flags(Mechanism::kRegular).query_content);
  CHECK(factor_flags(Mechanism::kDeformable).query_content);
  CHECK(factor_flags(Mechanism::kDynamic).query_content);
}

TEST_CASE("ledger table and csv") {
  const FlopLedger t = emit_table(CostShape::sequence(4, 2, 3, 1, 1));
  CHECK(t.find("transformer", "E1").macs == 64);
  CHECK_THROWS_AS(t.find("nonexistent", "E1"), ContractError);
  std::ostringstream os;
  t.write_csv(os);
  const std::string csv = os.str();
  CHECK(csv.rfind(std::string(FlopLedger::kCsvHeader) + "\n", 0) == 0);
  CHECK(csv.find("\ntransformer,E1,4,2,3,1,1,64,") != std::string::npos);
}
