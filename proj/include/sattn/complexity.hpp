#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sattn/attention.hpp"
#include "sattn/op_counter.hpp"
#include "sattn/relpos.hpp"

namespace sattn {

enum class Term { kE1, kE2, kE3, kE4 };
enum class Mechanism { kTransformer, kRegular, kDeformable, kDynamic };

std::string to_string(Term t);
std::string to_string(Mechanism m);

/// Shape parameters of a cost query. Counts assume self-attention over the
/// given layout with C_in = C_out = C and a position encoding of width
/// position_dim (C unless stated otherwise).
struct CostShape {
  Layout layout;
  Index channels = 0;       ///< C
  Index kernel_size = 3;    ///< N_k (taps, n×n on grids)
  Index groups = 16;        ///< N_g
  Index heads = 8;          ///< M
  Index position_dim = 0;   ///< 0 means "same as channels"

  static CostShape sequence(Index length, Index channels, Index kernel_size = 3, Index groups = 16, Index heads = 8);
  /// kernel_side is n; N_k = n².
  static CostShape grid(Index height, Index width, Index channels, Index kernel_side = 3, Index groups = 16,
                        Index heads = 8);

  Index ns() const { return layout.count(); }
  Index offsets() const { return offset_count(layout, layout); }
  Index pos_dim() const { return position_dim > 0 ? position_dim : channels; }
};

/// Closed-form MACs of one energy term computed on its own: the projection
/// part (linear in N_s) and the part that visits query-key pairs (E1, E2, E4)
/// or keys (E3).
struct TermCount {
  std::int64_t projection = 0;
  std::int64_t interaction = 0;
  std::int64_t total() const { return projection + interaction; }
};

TermCount count_term(Term term, const CostShape& shape);

/// W'_m projection, weighted sum over keys and W_m projection.
std::int64_t count_aggregation(const CostShape& shape);

/// Full switched Transformer layer with projections shared between terms;
/// adds the residual gate multiply for gated placement.
std::int64_t count_transformer(const Beta& beta, const CostShape& shape, Placement placement = Placement::kPlain);

/// Exact forward MACs of one mechanism. `beta` and `placement` apply to the
/// Transformer mechanism only.
std::int64_t count_mechanism(Mechanism mechanism, const CostShape& shape, const Beta& beta = Beta::full(),
                             Placement placement = Placement::kPlain);

/// Factor-usage pattern of a mechanism (or energy term).
struct FactorFlags {
  std::string spatial;  ///< "dense-global", "sparse-local", "sparse-global"
  bool query_content = false;
  bool key_content = false;
  bool relative_position = false;

  std::string str() const;
  friend bool operator==(const FactorFlags&, const FactorFlags&) = default;
};

FactorFlags factor_flags(Mechanism mechanism, std::optional<Term> term = std::nullopt);

struct LedgerEntry {
  std::string mechanism;
  std::string term;
  Index ns = 0;
  Index channels = 0;
  Index kernel_size = 0;
  Index groups = 0;
  Index heads = 0;
  std::int64_t macs = 0;
  std::string flags;
};

/// Exact multiply-add counts keyed by mechanism, term and shape.
class FlopLedger {
 public:
  void add(LedgerEntry entry) { entries_.push_back(std::move(entry)); }
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  std::int64_t total() const;
  /// First entry matching mechanism and term; throws ContractError if absent.
  const LedgerEntry& find(const std::string& mechanism, const std::string& term) const;

  static constexpr const char* kCsvHeader = "mechanism,term,N_s,C,N_k,N_g,M,macs,flags";
  void write_csv(std::ostream& os) const;

 private:
  std::vector<LedgerEntry> entries_;
};

/// One row per energy term, one for the combined four-term layer, and one
/// each for regular, deformable and dynamic convolution.
FlopLedger emit_table(const CostShape& shape);

/// Runs `body` with a fresh counter active and returns what it recorded.
OpCounts measure(const std::function<void()>& body);

}  // namespace sattn
