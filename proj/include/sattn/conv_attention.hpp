#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sattn/params.hpp"
#include "sattn/relpos.hpp"
#include "sattn/rng.hpp"
#include "sattn/tensor.hpp"

namespace sattn {

/// 1-d bilinear (hat) kernel g(a, b) = max(0, 1 - |a - b|).
template <typename Scalar>
Scalar bilinear_g(Scalar a, Scalar b) {
  using std::abs;
  return std::max(Scalar(0), Scalar(1) - abs(a - b));
}

/// N-d bilinear kernel G(a, b) = Π_n g(a_n, b_n).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar bilinear_G(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) throw ContractError("bilinear_G: points differ in dimensionality");
  Scalar out(1);
  for (Index n = 0; n < a.size(); ++n) out *= bilinear_g<Scalar>(a(n), static_cast<Scalar>(b(n)));
  return out;
}

/// Sampling offsets p_m of a convolution kernel, one per head. For sequences
/// only the x component is used.
struct ConvKernelSpec {
  struct Offset {
    Index dx = 0;
    Index dy = 0;
  };

  std::vector<Offset> offsets;
  int dims = 2;

  /// n×n grid centred on the query, row-major (dy outer, dx inner). n odd.
  static ConvKernelSpec square(Index n);
  /// n taps centred on the query. n odd.
  static ConvKernelSpec line(Index n);

  Index size() const { return static_cast<Index>(offsets.size()); }
  /// Index of the zero offset.
  Index center() const;
};

/// Attention weights of one head with a fixed number of nonzero entries per
/// query: keys(q, j) is a key index (-1 = outside the map, reads as zero) and
/// weights(q, j) its weight.
struct SparseWeights {
  IndexMatrix keys;
  Tensor weights;

  /// queries × num_keys dense copy of the weights (for inspection).
  Matrix dense(Index num_keys) const;
};

/// Σ_j weights(q,j) · x.row(keys(q,j)) for every query; one MAC per entry
/// per channel, out-of-map entries included.
Tensor sparse_aggregate(const Tensor& x, const SparseWeights& weights);

/// Indicator weights A_m(q,k) = 1 iff k = q + p_m, one SparseWeights per head.
std::vector<SparseWeights> regular_conv_weights(const Layout& layout, const ConvKernelSpec& spec);

/// Learnable W_m (C_out × C_in) per sampling point; W'_m is the identity.
struct ConvParams {
  std::vector<Tensor> kernel;

  static ConvParams init(const ConvKernelSpec& spec, Index in_channels, Index out_channels, Rng& rng);
  ParameterList parameters(const std::string& prefix = "") const;
};

/// Regular convolution expressed as attention: Σ_m W_m Σ_k A_m(q,k) x_k.
/// Positions outside the map contribute zero.
Tensor regular_conv_forward(const Tensor& x, const Layout& layout, const ConvParams& params, const ConvKernelSpec& spec);

struct DeformableParams {
  static constexpr double kOffsetLearningRateMultiplier = 0.1;

  ConvParams conv;
  /// w_m (C_in × dims) per sampling point: displacement = x_q^T w_m.
  std::vector<Tensor> offset_predictor;
  /// Zero-initialised residual scalar for insertion ahead of attention.
  Tensor gate;

  /// Offset predictors start at zero, so the unit starts as a regular
  /// convolution.
  static DeformableParams init(const ConvKernelSpec& spec, Index in_channels, Index out_channels, Rng& rng,
                               bool with_gate = false);
  /// Offset predictors carry the 0.1 learning-rate multiplier.
  ParameterList parameters(const std::string& prefix = "") const;
};

/// Bilinear weights G(k, loc) on the 2^dims integer neighbours of each
/// fractional location (rows of `locations`, columns x then y). The weight
/// tensor is differentiable w.r.t. `locations`.
SparseWeights bilinear_weights(const Tensor& locations, const Layout& layout);

/// A_m(q,k,x_q) = G(k, q + p_m + w_m^T x_q) for every sampling point m.
std::vector<SparseWeights> deformable_weights(const Tensor& x, const Layout& layout, const DeformableParams& params,
                                              const ConvKernelSpec& spec);

/// Σ_m W_m Σ_k G(k, q + p_m + w_m^T x_q) x_k. Out-of-map samples read zero.
Tensor deformable_forward(const Tensor& x, const Layout& layout, const DeformableParams& params,
                          const ConvKernelSpec& spec);

/// x + gate · deformable_forward(x): the residual insertion used ahead of a
/// Transformer attention layer.
Tensor deformable_unit_forward(const Tensor& x, const Layout& layout, const DeformableParams& params,
                               const ConvKernelSpec& spec);

}  // namespace sattn
