#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "sattn/errors.hpp"
#include "sattn/tensor.hpp"

namespace sattn {

template <typename Scalar>
using ColumnVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Interleaved sinusoidal code of a 1-d offset:
///   out[2i]   = sin(offset / base^(2i/dim))
///   out[2i+1] = cos(offset / base^(2i/dim))
template <typename Scalar = double>
ColumnVector<Scalar> sinusoid_1d(long offset, Index dim, Scalar base = Scalar(10000)) {
  if (dim <= 0 || dim % 2 != 0) {
    throw ContractError("sinusoidal encoding needs a positive even dimension, got " + std::to_string(dim));
  }
  ColumnVector<Scalar> out(dim);
  const Scalar delta = static_cast<Scalar>(offset);
  for (Index i = 0; i < dim / 2; ++i) {
    using std::pow;
    using std::sin;
    using std::cos;
    const Scalar wavelength = pow(base, Scalar(2 * i) / Scalar(dim));
    out(2 * i) = sin(delta / wavelength);
    out(2 * i + 1) = cos(delta / wavelength);
  }
  return out;
}

/// Relative position encoder R_{k-q}. Offsets beyond ±max_clip are clipped.
/// For grids the x and y codes are concatenated, [R^X, R^Y], each dim/2 wide.
class RelPosEncoder {
 public:
  RelPosEncoder(Index dim, long max_clip, double base = 10000.0);

  Index dim() const { return dim_; }
  long max_clip() const { return max_clip_; }
  double base() const { return base_; }

  Vector encode_1d(long offset) const;
  /// dim must be divisible by 4.
  Vector encode_2d(long dx, long dy) const;

 private:
  long clip(long offset) const { return std::clamp(offset, -max_clip_, max_clip_); }

  Index dim_;
  long max_clip_;
  double base_;
};

inline Vector encode_1d(long offset, Index dim, long max_clip, double base = 10000.0) {
  return RelPosEncoder(dim, max_clip, base).encode_1d(offset);
}

inline Vector encode_2d(long dx, long dy, Index dim, long max_clip, double base = 10000.0) {
  return RelPosEncoder(dim, max_clip, base).encode_2d(dx, dy);
}

/// Positions of a set of elements: a token sequence or a row-major grid.
struct Layout {
  enum class Kind { kSequence, kGrid };

  Kind kind = Kind::kSequence;
  Index height = 1;
  Index width = 0;

  static Layout sequence(Index length) { return {Kind::kSequence, 1, length}; }
  static Layout grid(Index height, Index width) { return {Kind::kGrid, height, width}; }

  Index count() const { return height * width; }
  Index x_of(Index i) const { return i % width; }
  Index y_of(Index i) const { return i / width; }
  Index at(Index x, Index y) const { return y * width + x; }
  bool contains(Index x, Index y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  Index longest_extent() const { return std::max(height, width); }
  int dims() const { return kind == Kind::kGrid ? 2 : 1; }
};

/// Every offset k - q realisable between a query layout and a key layout,
/// encoded once, plus the (query, key) -> offset-row lookup.
struct OffsetTable {
  Matrix encodings;     ///< num_offsets × dim
  IndexMatrix index;    ///< queries × keys, row into `encodings`
  Index num_offsets() const { return encodings.rows(); }
};

/// Number of distinct offsets between two layouts of the same kind.
Index offset_count(const Layout& queries, const Layout& keys);

OffsetTable build_offset_table(const Layout& queries, const Layout& keys, const RelPosEncoder& encoder);

}  // namespace sattn
