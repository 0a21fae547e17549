#pragma once

// Slow reference implementations written as explicit loops over plain
// matrices. They share no code with the library's forward paths and exist
// only to be compared against them.

#include <string>
#include <vector>

#include "sattn/tensor.hpp"

namespace sattn::oracle {

/// Feature map of height × width cells, C channels; cell (x, y) is row
/// y·width + x. Height 1 means a sequence: kernels then have n taps along x
/// instead of n × n.
struct Grid {
  Index height = 1;
  Index width = 0;
  Matrix features;
};

/// Direct sliding-window cross-correlation with zero padding:
///   out(x, y) = Σ_{ky,kx} K[ky][kx] · in(x + kx - r, y + ky - r),  r = n / 2.
/// kernel[ky * n + kx] is C_out × C_in.
Matrix conv2d(const Grid& in, const std::vector<Matrix>& kernel, Index n);

/// As conv2d, but tap t reads the bilinear sample of `in` at the fractional
/// location (x + kx - r + ox, y + ky - r + oy) with (ox, oy) = in(x, y)ᵀ ·
/// predictor[t]. Samples weigh every cell by max(0,1-|Δx|)·max(0,1-|Δy|).
/// For a sequence (height 1) predictor[t] has one column and only x moves.
Matrix deformable2d(const Grid& in, const std::vector<Matrix>& kernel, const std::vector<Matrix>& predictor, Index n);

/// Interleaved sinusoid of a clipped offset (same closed form as the
/// library, derived independently).
Vector sinusoid(long offset, Index dim, long clip, double base = 10000.0);

/// Position code of offset (dx, dy): the sinusoid alone for sequences,
/// [sinusoid(dx, dim/2) | sinusoid(dy, dim/2)] for grids.
Vector position_code(long dx, long dy, bool grid, Index dim, long clip);

/// Plain-matrix copy of one switched attention layer's parameters (per head).
struct AttentionWeights {
  std::vector<Matrix> U, VC, VR, u, v, Wv, Wo;
};

/// Queries (or keys) as positions plus content rows.
struct Points {
  Index height = 1;
  Index width = 0;
  bool grid = false;
  Matrix content;
};

/// y_q = Σ_m Wo_m Σ_k softmax_k(Σ_j β_j E_j(q,k)) Wv_m x_k with
///   E1 = (U z_q)·(VC x_k), E2 = (U z_q)·(VR R), E3 = u·(VC x_k), E4 = v·(VR R),
/// R = position_code(k - q). `beta` is the 4-character switch string; with
/// every switch off the weights are uniform. Region = all keys.
Matrix attention(const Points& queries, const Points& keys, const AttentionWeights& w, const std::string& beta,
                 Index pos_dim, long clip);

/// Attention weight matrices (queries × keys), one per head, of the above.
std::vector<Matrix> attention_weights(const Points& queries, const Points& keys, const AttentionWeights& w,
                                      const std::string& beta, Index pos_dim, long clip);

struct DynamicWeights {
  Matrix A, a, B, b;            ///< GLU: (x Aᵀ + a) ⊙ σ(x Bᵀ + b)
  std::vector<Matrix> predictor;  ///< per group, C × N_k
  Matrix pointwise;             ///< C_out × C
};

/// GLU, per-group softmax kernels from the gated feature, depth-wise
/// aggregation over kernel taps (outside taps dropped), point-wise projection.
/// Channel c (0-based) belongs to group c / (C / N_g).
Matrix dynamic_conv(const Grid& in, const DynamicWeights& w, Index n);

/// The per-group kernels of dynamic_conv, each cells × N_k.
std::vector<Matrix> dynamic_kernels(const Grid& in, const DynamicWeights& w);

}  // namespace sattn::oracle
