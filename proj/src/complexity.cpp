#include "sattn/complexity.hpp"

#include <ostream>

#include "sattn/errors.hpp"

namespace sattn {

std::string to_string(Term t) {
  switch (t) {
    case Term::kE1: return "E1";
    case Term::kE2: return "E2";
    case Term::kE3: return "E3";
    case Term::kE4: return "E4";
  }
  return "?";
}

std::string to_string(Mechanism m) {
  switch (m) {
    case Mechanism::kTransformer: return "transformer";
    case Mechanism::kRegular: return "regular";
    case Mechanism::kDeformable: return "deformable";
    case Mechanism::kDynamic: return "dynamic";
  }
  return "?";
}

CostShape CostShape::sequence(Index length, Index channels, Index kernel_size, Index groups, Index heads) {
  CostShape s;
  s.layout = Layout::sequence(length);
  s.channels = channels;
  s.kernel_size = kernel_size;
  s.groups = groups;
  s.heads = heads;
  return s;
}

CostShape CostShape::grid(Index height, Index width, Index channels, Index kernel_side, Index groups, Index heads) {
  CostShape s;
  s.layout = Layout::grid(height, width);
  s.channels = channels;
  s.kernel_size = kernel_side * kernel_side;
  s.groups = groups;
  s.heads = heads;
  return s;
}

namespace {

void validate(const CostShape& s) {
  if (s.ns() <= 0 || s.channels <= 0 || s.kernel_size <= 0 || s.groups <= 0 || s.heads <= 0) {
    throw ContractError("cost shape parameters must be positive");
  }
  if (s.channels % s.heads != 0) throw ContractError("head count must divide the channel count");
}

}  // namespace

// Per head the projections cost rows·C·d and pair products d per pair;
// summed over M heads with M·d = C this gives the expressions below.
TermCount count_term(Term term, const CostShape& shape) {
  validate(shape);
  const std::int64_t n = shape.ns();
  const std::int64_t c = shape.channels;
  const std::int64_t offsets = shape.offsets();
  const std::int64_t r = shape.pos_dim();
  TermCount out;
  switch (term) {
    case Term::kE1:
      out.projection = n * c * c + n * c * c;
      out.interaction = n * n * c;
      break;
    case Term::kE2:
      out.projection = n * c * c + offsets * r * c;
      out.interaction = n * n * c;
      break;
    case Term::kE3:
      out.projection = n * c * c;
      out.interaction = n * c;
      break;
    case Term::kE4:
      out.projection = offsets * r * c;
      out.interaction = n * n * c;
      break;
  }
  return out;
}

std::int64_t count_aggregation(const CostShape& shape) {
  validate(shape);
  const std::int64_t n = shape.ns();
  const std::int64_t c = shape.channels;
  return n * c * c + n * n * c + n * c * c;
}

std::int64_t count_transformer(const Beta& beta, const CostShape& shape, Placement placement) {
  validate(shape);
  const std::int64_t n = shape.ns();
  const std::int64_t c = shape.channels;
  std::int64_t macs = count_aggregation(shape);
  if (beta.uses_query_projection()) macs += n * c * c;
  if (beta.uses_key_projection()) macs += n * c * c;
  if (beta.uses_position_projection()) macs += static_cast<std::int64_t>(shape.offsets()) * shape.pos_dim() * c;
  for (int j : {1, 2, 4}) {
    if (beta.term(j)) macs += n * n * c;
  }
  if (beta.term(3)) macs += n * c;
  if (placement == Placement::kGatedResidual) macs += n * c;
  return macs;
}

std::int64_t count_mechanism(Mechanism mechanism, const CostShape& shape, const Beta& beta, Placement placement) {
  validate(shape);
  const std::int64_t n = shape.ns();
  const std::int64_t c = shape.channels;
  const std::int64_t taps = shape.kernel_size;
  switch (mechanism) {
    case Mechanism::kTransformer:
      return count_transformer(beta, shape, placement);
    case Mechanism::kRegular:
      // indicator-weighted gather + W_m per tap
      return n * taps * (c + c * c);
    case Mechanism::kDeformable: {
      const std::int64_t dims = shape.layout.dims();
      const std::int64_t corners = std::int64_t{1} << dims;
      // offset prediction, bilinear weight products, interpolation, W_m
      return n * taps * (c * dims + corners * (dims - 1) + corners * c + c * c);
    }
    case Mechanism::kDynamic:
      // GLU (two projections + gate product), kernel prediction,
      // depth-wise aggregation, point-wise projection
      return 2 * n * c * c + n * c + n * c * shape.groups * taps + n * taps * c + n * c * c;
  }
  return 0;
}

std::string FactorFlags::str() const {
  return "spatial=" + spatial + ";query=" + (query_content ? "1" : "0") + ";key=" + (key_content ? "1" : "0") +
         ";position=" + (relative_position ? "1" : "0");
}

FactorFlags factor_flags(Mechanism mechanism, std::optional<Term> term) {
  switch (mechanism) {
    case Mechanism::kTransformer: {
      if (!term) return {"dense-global", true, true, true};
      switch (*term) {
        case Term::kE1: return {"dense-global", true, true, false};
        case Term::kE2: return {"dense-global", true, false, true};
        case Term::kE3: return {"dense-global", false, true, false};
        case Term::kE4: return {"dense-global", false, false, true};
      }
      break;
    }
    case Mechanism::kRegular: return {"sparse-local", false, false, true};
    case Mechanism::kDeformable: return {"sparse-global", true, false, true};
    case Mechanism::kDynamic: return {"sparse-local", true, false, true};
  }
  return {};
}

std::int64_t FlopLedger::total() const {
  std::int64_t t = 0;
  for (const auto& e : entries_) t += e.macs;
  return t;
}

const LedgerEntry& FlopLedger::find(const std::string& mechanism, const std::string& term) const {
  for (const auto& e : entries_) {
    if (e.mechanism == mechanism && e.term == term) return e;
  }
  throw ContractError("ledger has no entry for " + mechanism + "/" + term);
}

void FlopLedger::write_csv(std::ostream& os) const {
  os << kCsvHeader << "\n";
  for (const auto& e : entries_) {
    os << e.mechanism << "," << e.term << "," << e.ns << "," << e.channels << "," << e.kernel_size << "," << e.groups
       << "," << e.heads << "," << e.macs << "," << e.flags << "\n";
  }
}

FlopLedger emit_table(const CostShape& shape) {
  validate(shape);
  FlopLedger ledger;
  auto row = [&](Mechanism m, const std::string& term, std::int64_t macs, const FactorFlags& flags) {
    ledger.add({to_string(m), term, shape.ns(), shape.channels, shape.kernel_size, shape.groups, shape.heads, macs,
                flags.str()});
  };
  for (Term t : {Term::kE1, Term::kE2, Term::kE3, Term::kE4}) {
    row(Mechanism::kTransformer, to_string(t), count_term(t, shape).total(), factor_flags(Mechanism::kTransformer, t));
  }
  row(Mechanism::kTransformer, "1111", count_transformer(Beta::full(), shape),
      factor_flags(Mechanism::kTransformer));
  for (Mechanism m : {Mechanism::kRegular, Mechanism::kDeformable, Mechanism::kDynamic}) {
    row(m, "-", count_mechanism(m, shape), factor_flags(m));
  }
  return ledger;
}

OpCounts measure(const std::function<void()>& body) {
  OpCounts counts;
  {
    CountScope scope(counts);
    body();
  }
  return counts;
}

}  // namespace sattn
