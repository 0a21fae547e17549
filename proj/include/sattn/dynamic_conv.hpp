#pragma once

#include <string>
#include <vector>

#include "sattn/conv_attention.hpp"
#include "sattn/params.hpp"
#include "sattn/relpos.hpp"
#include "sattn/rng.hpp"
#include "sattn/tensor.hpp"

namespace sattn {

/// 1-based group of 1-based channel c: ceil(c / (C_in / N_g)).
/// Throws ContractError when c is outside [1, C_in] or N_g does not divide C_in.
Index group_of_channel(Index c, Index in_channels, Index groups);

/// Gated linear unit: (x A^T + a) ⊙ σ(x B^T + b), both projections C_in → C_in.
struct GluParams {
  Tensor linear;
  Tensor linear_bias;
  Tensor gate;
  Tensor gate_bias;

  static GluParams init(Index channels, Rng& rng);
  ParameterList parameters(const std::string& prefix = "") const;
};

Tensor glu(const Tensor& x, const GluParams& params);

struct DynamicConvParams {
  static constexpr Index kDefaultGroups = 16;

  Index in_channels = 0;
  Index out_channels = 0;
  Index groups = kDefaultGroups;
  ConvKernelSpec spec;
  /// Renormalise the kernel over the taps that fall inside the map. Off by
  /// default: outside taps are dropped and the rest keep their weights.
  bool renormalize_at_border = false;

  /// predictor[g] is C_in × N_k; column j is d_{j,g}.
  std::vector<Tensor> predictor;
  /// Point-wise W_c, C_out × C_in.
  Tensor pointwise;
  GluParams gating;

  static DynamicConvParams init(const ConvKernelSpec& spec, Index in_channels, Index out_channels, Index groups,
                                Rng& rng);
  Index kernel_size() const { return spec.size(); }
  ParameterList parameters(const std::string& prefix = "") const;
};

/// Per group g, the softmax over taps j of d_{j,g}^T x_q: one N × N_k tensor
/// per group whose rows sum to 1.
std::vector<Tensor> dynamic_kernel(const Tensor& x, const DynamicConvParams& params);

/// A_c(q, k) for one query: a C_in × keys matrix with K_{j, g(c)} at
/// k = q + p_j and 0 elsewhere. `kernels` is the output of dynamic_kernel.
Matrix dynamic_weights(Index query, const std::vector<Tensor>& kernels, const Layout& layout,
                       const DynamicConvParams& params);

/// GLU, then per-channel aggregation with the group-shared dynamic kernel
/// predicted from the gated feature, then the point-wise projection.
Tensor dynamic_forward(const Tensor& x, const Layout& layout, const DynamicConvParams& params);

}  // namespace sattn
