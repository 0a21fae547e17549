#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sattn/params.hpp"
#include "sattn/relpos.hpp"
#include "sattn/rng.hpp"
#include "sattn/tensor.hpp"

namespace sattn {

/// Energy-term switches β1..β4, written as a 4-character 0/1 string in the
/// order E1 (query·key content), E2 (query content·relative position),
/// E3 (key content only), E4 (relative position only).
class Beta {
 public:
  Beta() = default;
  constexpr Beta(bool e1, bool e2, bool e3, bool e4) : on_{e1, e2, e3, e4} {}

  /// Throws ContractError unless `s` is exactly four characters over {0,1}.
  static Beta parse(std::string_view s);
  static Beta full() { return {true, true, true, true}; }
  /// All 16 configurations in ascending binary order ("0000" .. "1111").
  static std::vector<Beta> all();

  /// j is 1-based, matching the term numbering.
  bool term(int j) const { return on_.at(static_cast<std::size_t>(j - 1)); }
  bool any() const { return on_[0] || on_[1] || on_[2] || on_[3]; }
  bool uses_query_projection() const { return on_[0] || on_[1]; }
  bool uses_key_projection() const { return on_[0] || on_[2]; }
  bool uses_position_projection() const { return on_[1] || on_[3]; }
  /// True when every active term of *this is active in `other`.
  bool subset_of(const Beta& other) const;
  std::string str() const;

  friend bool operator==(const Beta&, const Beta&) = default;

 private:
  std::array<bool, 4> on_{false, false, false, false};
};

/// Supporting key region Ω_q.
struct Region {
  enum class Kind { kFull, kWindow, kCausal };
  Kind kind = Kind::kFull;
  /// Odd window extent per axis for kWindow.
  Index window = 0;

  static Region full() { return {}; }
  static Region local(Index window) { return {Kind::kWindow, window}; }
  static Region causal() { return {Kind::kCausal, 0}; }
};

struct AttentionConfig {
  Index heads = 8;
  Beta beta = Beta::full();
  Index model_dim = 0;
  Region region;
  /// Permits the all-zero β configuration (uniform weights over Ω_q).
  bool allow_uniform = false;

  Index head_dim() const { return model_dim / heads; }
  /// Throws ContractError when heads does not divide model_dim, or when no
  /// term is active without allow_uniform.
  void validate() const;
};

/// Learnable matrices of one switched Transformer attention layer, per head m:
///   query_embed[m]    U_m    (d × C)
///   key_embed[m]      V^C_m  (d × C)
///   position_embed[m] V^R_m  (d × D_R)
///   key_bias[m]       u_m    (1 × d)
///   position_bias[m]  v_m    (1 × d)
///   value_proj[m]     W'_m   (d × C)
///   output_proj[m]    W_m    (C × d)
/// with d = C / M. `gate` is the zero-initialised residual scalar, present
/// only for gated residual placement.
struct TransformerParams {
  std::vector<Tensor> query_embed;
  std::vector<Tensor> key_embed;
  std::vector<Tensor> position_embed;
  std::vector<Tensor> key_bias;
  std::vector<Tensor> position_bias;
  std::vector<Tensor> value_proj;
  std::vector<Tensor> output_proj;
  Tensor gate;

  static TransformerParams init(const AttentionConfig& config, Index position_dim, Rng& rng, bool with_gate);

  Index heads() const { return static_cast<Index>(query_embed.size()); }
  ParameterList parameters(const std::string& prefix = "") const;
};

/// Precomputed per-layer positional context: layouts, the offset encoding
/// table over every realisable k - q, and the Ω_q mask (absent = full).
struct AttentionGeometry {
  Layout queries;
  Layout keys;
  OffsetTable offsets;
  std::optional<Mask> region_mask;

  /// The encoding dimension is `position_dim`; offsets are clipped to
  /// ±(longest extent - 1).
  static AttentionGeometry build(const AttentionConfig& config, const Layout& queries, const Layout& keys,
                                 Index position_dim);
};

/// Ω_q as a queries×keys mask, or nullopt for the full region.
std::optional<Mask> region_mask(const Region& region, const Layout& queries, const Layout& keys);

/// Per-head logits of the four terms. E1, E2, E4 are queries×keys; E3 is a
/// 1×keys row that broadcasts over queries. Absent terms are undefined tensors.
struct EnergyTerms {
  Index num_queries = 0;
  Index num_keys = 0;
  std::vector<Tensor> e1;
  std::vector<Tensor> e2;
  std::vector<Tensor> e3;
  std::vector<Tensor> e4;
};

/// E1 = z_q^T U_m^T V^C_m x_k: query projection times key projection.
std::vector<Tensor> energy_e1(const Tensor& z, const Tensor& x, const TransformerParams& params);
/// E2 = z_q^T U_m^T V^R_m R_{k-q}, one d-length dot per query-key pair.
std::vector<Tensor> energy_e2(const Tensor& z, const OffsetTable& offsets, const TransformerParams& params);
/// E3 = u_m^T V^C_m x_k, one scalar per key (1×keys).
std::vector<Tensor> energy_e3(const Tensor& x, const TransformerParams& params);
/// E4 = v_m^T V^R_m R_{k-q}, evaluated for every query-key pair; entries
/// depend on the offset only.
std::vector<Tensor> energy_e4(const OffsetTable& offsets, const TransformerParams& params);

/// Computes the terms switched on by `beta`, sharing the U, V^C and V^R
/// projections between the terms that use them.
EnergyTerms compute_energy_terms(const Beta& beta, const Tensor& z, const Tensor& x, const OffsetTable& offsets,
                                 const TransformerParams& params);

/// Softmax over keys in Ω_q of the β-switched sum of terms, one queries×keys
/// matrix per head. With every β off the weights are uniform over Ω_q.
std::vector<Tensor> attention_weights(const AttentionConfig& config, const EnergyTerms& terms,
                                      const std::optional<Mask>& mask);

/// y_q = Σ_m W_m [Σ_k A_m(q,k) W'_m x_k].
Tensor aggregate(const std::vector<Tensor>& weights, const Tensor& x, const TransformerParams& params);

enum class Placement {
  kPlain,          ///< output is the attention feature y
  kGatedResidual,  ///< output is z + gate·y, gate initialised to zero
};

/// Full switched attention layer. In self-attention mode (encoder_decoder =
/// false) `z` and `x` must be the same tensor.
Tensor transformer_layer_forward(const Tensor& z, const Tensor& x, const AttentionConfig& config,
                                 const TransformerParams& params, const AttentionGeometry& geometry,
                                 bool encoder_decoder, Placement placement = Placement::kPlain);

}  // namespace sattn
