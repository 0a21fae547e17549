#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sattn {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
/// true = entry participates, false = masked out.
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Integer index table; -1 marks "no source" (reads as zero).
using IndexMatrix = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_string(Index rows, Index cols);

/// Dense rank-2 tensor taking part in reverse-mode differentiation.
///
/// A Tensor is a shared handle to an immutable value plus the tape edge that
/// produced it. Leaves created with parameter() accumulate gradients across
/// backward() calls until zero_grad(). Row vectors are 1×n, scalars 1×1.
class Tensor {
 public:
  using BackwardFn = std::function<void(const Matrix& grad_out)>;

  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor constant(Matrix value) { return Tensor(std::move(value), false); }
  static Tensor parameter(Matrix value) { return Tensor(std::move(value), true); }
  static Tensor scalar(double v, bool requires_grad = false);

  /// Result of a differentiable operation. `backward` receives d loss / d
  /// result and must route it to the parents with accumulate_grad().
  static Tensor from_op(Matrix value, std::vector<Tensor> parents, BackwardFn backward);

  bool defined() const { return static_cast<bool>(node_); }
  /// True when both handles refer to the same node.
  bool same_as(const Tensor& other) const { return node_ == other.node_; }
  const Matrix& value() const;
  /// Leaf values only; used by optimizers and finite differencing.
  Matrix& mutable_value();

  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Index size() const { return value().size(); }
  std::vector<Index> shape() const { return {rows(), cols()}; }
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  /// Zero-filled matrix of the value's shape when no gradient has arrived.
  Matrix grad() const;
  void zero_grad();
  void accumulate_grad(const Matrix& g) const;

  friend void backward(const Tensor& loss);

 private:
  struct Node;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

/// Propagates d loss / d t into every grad-required ancestor of `loss`.
/// Throws ContractError unless `loss` is 1×1.
void backward(const Tensor& loss);

// ---- matrix products -------------------------------------------------------

/// a·b. Counts rows(a)·cols(a)·cols(b) MACs.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a·bᵀ. Counts rows(a)·cols(a)·rows(b) MACs.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// out(i,j) = a.row(i) · b.row(index(i,j)); index -1 yields 0.
/// Counts one MAC per element of the row dot products that are evaluated.
Tensor indexed_row_dot(const Tensor& a, const Tensor& b, const IndexMatrix& index);

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Hadamard product; one MAC per element.
Tensor mul(const Tensor& a, const Tensor& b);
/// a·c for a constant c; one MAC per element.
Tensor scale(const Tensor& a, double c);
/// a·s for a 1×1 tensor s; one MAC per element.
Tensor mul_scalar(const Tensor& a, const Tensor& s);
/// a + 1·row, broadcasting a 1×n row over every row of a.
Tensor add_row(const Tensor& a, const Tensor& row);
/// a + col·1ᵀ, broadcasting an m×1 column over every column of a.
Tensor add_col(const Tensor& a, const Tensor& col);
/// n copies of a 1×c row stacked into an n×c matrix.
Tensor repeat_rows(const Tensor& row, Index n);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }

// ---- reductions and reshaping ----------------------------------------------

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// 1×c column means.
Tensor mean_rows(const Tensor& a);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, Index start, Index count);
/// out.row(i) = a.row(index(i)) or zeros when index(i) == -1.
Tensor gather_rows(const Tensor& a, const std::vector<Index>& index);

// ---- normalisation and losses ----------------------------------------------

/// Softmax along `axis` (0: each column normalised, 1: each row normalised),
/// computed with max subtraction. Masked entries are treated as -inf and come
/// out exactly 0. A slice with no unmasked entry throws DegenerateRegionError.
Tensor softmax(const Tensor& x, int axis, const std::optional<Mask>& mask = std::nullopt);

/// Mean over rows of -log softmax(logits.row(i))[labels[i]].
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace sattn
