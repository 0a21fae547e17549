#include "sattn/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "sattn/errors.hpp"
#include "sattn/op_counter.hpp"

namespace sattn {

std::string shape_string(Index rows, Index cols) {
  std::ostringstream os;
  os << "[" << rows << "x" << cols << "]";
  return os.str();
}

struct Tensor::Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<Tensor> parents;
  BackwardFn backward;
};

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return Tensor(std::move(m), requires_grad);
}

Tensor Tensor::from_op(Matrix value, std::vector<Tensor> parents, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->leaf = false;
  for (const auto& p : parents) {
    if (p.requires_grad()) node->requires_grad = true;
  }
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

const Matrix& Tensor::value() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->value;
}

Matrix& Tensor::mutable_value() {
  if (!node_) throw ContractError("use of an undefined tensor");
  if (!node_->leaf) throw ContractError("only leaf tensors may be modified in place");
  return node_->value;
}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) {
    throw ContractError("item() requires a 1x1 tensor, got " + shape_string(rows(), cols()));
  }
  return value()(0, 0);
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && node_->leaf; }
bool Tensor::has_grad() const { return node_ && node_->grad.size() > 0; }

Matrix Tensor::grad() const {
  if (!has_grad()) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.resize(0, 0);
}

void Tensor::accumulate_grad(const Matrix& g) const {
  if (!requires_grad()) return;
  if (g.rows() != rows() || g.cols() != cols()) {
    throw DimensionError("gradient " + shape_string(g.rows(), g.cols()) + " does not match value " +
                         shape_string(rows(), cols()));
  }
  if (node_->grad.size() == 0) {
    node_->grad = g;
  } else {
    node_->grad += g;
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("backward() needs a scalar loss, got " +
                        (loss.defined() ? shape_string(loss.rows(), loss.cols()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Tensor::Node*> order;
  std::unordered_set<Tensor::Node*> seen;
  std::vector<std::pair<Tensor::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node_.get(), 0);
  seen.insert(loss.node_.get());
  while (!stack.empty()) {
    Tensor::Node* node = stack.back().first;
    const std::size_t next = stack.back().second;
    if (next < node->parents.size()) {
      ++stack.back().second;
      Tensor::Node* parent = node->parents[next].node_.get();
      if (parent->requires_grad && !seen.count(parent)) {
        seen.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  NoCountScope quiet;
  // Interior gradients are per-pass; leaves keep accumulating.
  for (auto* n : order) {
    if (!n->leaf) n->grad.resize(0, 0);
  }
  Matrix seed(1, 1);
  seed(0, 0) = 1.0;
  loss.accumulate_grad(seed);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor::Node* n = *it;
    if (n->leaf || !n->backward || n->grad.size() == 0) continue;
    n->backward(n->grad);
  }
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.rows(), a.cols()) + " and " +
                         shape_string(b.rows(), b.cols()) + " differ");
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner extents differ for " + shape_string(a.rows(), a.cols()) + " x " +
                         shape_string(b.rows(), b.cols()));
  }
  counting::add_macs(a.rows() * a.cols() * b.cols());
  Matrix out = a.value() * b.value();
  return Tensor::from_op(std::move(out), {a, b}, [a, b](const Matrix& g) {
    if (a.requires_grad()) a.accumulate_grad(g * b.value().transpose());
    if (b.requires_grad()) b.accumulate_grad(a.value().transpose() * g);
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner extents differ for " + shape_string(a.rows(), a.cols()) + " x " +
                         shape_string(b.rows(), b.cols()) + "^T");
  }
  counting::add_macs(a.rows() * a.cols() * b.rows());
  Matrix out = a.value() * b.value().transpose();
  return Tensor::from_op(std::move(out), {a, b}, [a, b](const Matrix& g) {
    if (a.requires_grad()) a.accumulate_grad(g * b.value());
    if (b.requires_grad()) b.accumulate_grad(g.transpose() * a.value());
  });
}

Tensor transpose(const Tensor& a) {
  Matrix out = a.value().transpose();
  return Tensor::from_op(std::move(out), {a}, [a](const Matrix& g) { a.accumulate_grad(g.transpose()); });
}

Tensor indexed_row_dot(const Tensor& a, const Tensor& b, const IndexMatrix& index) {
  if (a.cols() != b.cols()) {
    throw DimensionError("indexed_row_dot: row lengths differ for " + shape_string(a.rows(), a.cols()) + " and " +
                         shape_string(b.rows(), b.cols()));
  }
  if (index.rows() != a.rows()) {
    throw DimensionError("indexed_row_dot: index has " + std::to_string(index.rows()) + " rows, a has " +
                         std::to_string(a.rows()));
  }
  const Index n = index.rows();
  const Index m = index.cols();
  Matrix out = Matrix::Zero(n, m);
  std::int64_t evaluated = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      const Index r = index(i, j);
      if (r < 0) continue;
      if (r >= b.rows()) throw ContractError("indexed_row_dot: index " + std::to_string(r) + " out of range");
      out(i, j) = a.value().row(i).dot(b.value().row(r));
      ++evaluated;
    }
  }
  counting::add_macs(evaluated * a.cols());
  return Tensor::from_op(std::move(out), {a, b}, [a, b, index](const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    Matrix gb = Matrix::Zero(b.rows(), b.cols());
    for (Index i = 0; i < index.rows(); ++i) {
      for (Index j = 0; j < index.cols(); ++j) {
        const Index r = index(i, j);
        if (r < 0) continue;
        ga.row(i) += g(i, j) * b.value().row(r);
        gb.row(r) += g(i, j) * a.value().row(i);
      }
    }
    a.accumulate_grad(ga);
    b.accumulate_grad(gb);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  return Tensor::from_op(std::move(out), {a, b}, [a, b](const Matrix& g) {
    a.accumulate_grad(g);
    b.accumulate_grad(g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Matrix out = a.value() - b.value();
  return Tensor::from_op(std::move(out), {a, b}, [a, b](const Matrix& g) {
    a.accumulate_grad(g);
    if (b.requires_grad()) b.accumulate_grad(-g);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  counting::add_macs(a.size());
  Matrix out = a.value().cwiseProduct(b.value());
  return Tensor::from_op(std::move(out), {a, b}, [a, b](const Matrix& g) {
    if (a.requires_grad()) a.accumulate_grad(g.cwiseProduct(b.value()));
    if (b.requires_grad()) b.accumulate_grad(g.cwiseProduct(a.value()));
  });
}

Tensor scale(const Tensor& a, double c) {
  counting::add_macs(a.size());
  Matrix out = a.value() * c;
  return Tensor::from_op(std::move(out), {a}, [a, c](const Matrix& g) { a.accumulate_grad(g * c); });
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw DimensionError("mul_scalar: scale must be 1x1, got " + shape_string(s.rows(), s.cols()));
  }
  counting::add_macs(a.size());
  const double sv = s.value()(0, 0);
  Matrix out = a.value() * sv;
  return Tensor::from_op(std::move(out), {a, s}, [a, s](const Matrix& g) {
    if (a.requires_grad()) a.accumulate_grad(g * s.value()(0, 0));
    if (s.requires_grad()) {
      Matrix gs(1, 1);
      gs(0, 0) = g.cwiseProduct(a.value()).sum();
      s.accumulate_grad(gs);
    }
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: " + shape_string(row.rows(), row.cols()) + " cannot broadcast over " +
                         shape_string(a.rows(), a.cols()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return Tensor::from_op(std::move(out), {a, row}, [a, row](const Matrix& g) {
    a.accumulate_grad(g);
    if (row.requires_grad()) row.accumulate_grad(g.colwise().sum());
  });
}

Tensor add_col(const Tensor& a, const Tensor& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) {
    throw DimensionError("add_col: " + shape_string(col.rows(), col.cols()) + " cannot broadcast over " +
                         shape_string(a.rows(), a.cols()));
  }
  Matrix out = a.value().colwise() + col.value().col(0);
  return Tensor::from_op(std::move(out), {a, col}, [a, col](const Matrix& g) {
    a.accumulate_grad(g);
    if (col.requires_grad()) col.accumulate_grad(g.rowwise().sum());
  });
}

Tensor repeat_rows(const Tensor& row, Index n) {
  if (row.rows() != 1) throw DimensionError("repeat_rows: expected a row, got " + shape_string(row.rows(), row.cols()));
  Matrix out = row.value().replicate(n, 1);
  return Tensor::from_op(std::move(out), {row}, [row](const Matrix& g) { row.accumulate_grad(g.colwise().sum()); });
}

Tensor sigmoid(const Tensor& a) {
  counting::add_exps(a.size());
  counting::add_divs(a.size());
  Matrix out = a.value().unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  Matrix saved = out;
  return Tensor::from_op(std::move(out), {a}, [a, saved](const Matrix& g) {
    a.accumulate_grad(g.cwiseProduct(saved.cwiseProduct((1.0 - saved.array()).matrix())));
  });
}

Tensor relu(const Tensor& a) {
  Matrix out = a.value().cwiseMax(0.0);
  return Tensor::from_op(std::move(out), {a}, [a](const Matrix& g) {
    a.accumulate_grad(g.cwiseProduct(a.value().unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; })));
  });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return Tensor::from_op(std::move(out), {a}, [a](const Matrix& g) {
    a.accumulate_grad(Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return Tensor::from_op(std::move(out), {a}, [a, n](const Matrix& g) {
    a.accumulate_grad(Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
  });
}

Tensor mean_rows(const Tensor& a) {
  const double n = static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() / n;
  return Tensor::from_op(std::move(out), {a}, [a, n](const Matrix& g) {
    a.accumulate_grad((g / n).replicate(a.rows(), 1));
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: nothing to concatenate");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row counts differ (" + std::to_string(rows) + " vs " +
                           std::to_string(p.rows()) + ")");
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return Tensor::from_op(std::move(out), parts, [parts](const Matrix& g) {
    Index at = 0;
    for (const auto& p : parts) {
      if (p.requires_grad()) p.accumulate_grad(g.middleCols(at, p.cols()));
      at += p.cols();
    }
  });
}

Tensor slice_cols(const Tensor& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside " + shape_string(a.rows(), a.cols()));
  }
  Matrix out = a.value().middleCols(start, count);
  return Tensor::from_op(std::move(out), {a}, [a, start, count](const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    ga.middleCols(start, count) = g;
    a.accumulate_grad(ga);
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<Index>& index) {
  const Index n = static_cast<Index>(index.size());
  Matrix out = Matrix::Zero(n, a.cols());
  for (Index i = 0; i < n; ++i) {
    const Index r = index[static_cast<std::size_t>(i)];
    if (r >= a.rows()) throw ContractError("gather_rows: index " + std::to_string(r) + " out of range");
    if (r >= 0) out.row(i) = a.value().row(r);
  }
  return Tensor::from_op(std::move(out), {a}, [a, index](const Matrix& g) {
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (index[i] >= 0) ga.row(index[i]) += g.row(static_cast<Index>(i));
    }
    a.accumulate_grad(ga);
  });
}

namespace {

// Row-wise masked softmax on a plain matrix; also used for the axis-0 case
// through a transposed copy.
Matrix softmax_rows(const Matrix& x, const Mask* mask) {
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  std::int64_t live = 0;
  for (Index i = 0; i < x.rows(); ++i) {
    double peak = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < x.cols(); ++j) {
      if (mask && !(*mask)(i, j)) continue;
      if (!std::isfinite(x(i, j))) throw NumericError("softmax: non-finite logit in slice " + std::to_string(i));
      peak = std::max(peak, x(i, j));
    }
    if (peak == -std::numeric_limits<double>::infinity()) {
      throw DegenerateRegionError("softmax: slice " + std::to_string(i) + " has no unmasked entry");
    }
    if (!std::isfinite(peak)) throw NumericError("softmax: non-finite input in slice " + std::to_string(i));
    double total = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
      if (mask && !(*mask)(i, j)) continue;
      y(i, j) = std::exp(x(i, j) - peak);
      total += y(i, j);
      ++live;
    }
    y.row(i) /= total;
  }
  counting::add_exps(live);
  counting::add_divs(live);
  return y;
}

}  // namespace

Tensor softmax(const Tensor& x, int axis, const std::optional<Mask>& mask) {
  if (axis != 0 && axis != 1) throw ContractError("softmax: axis must be 0 or 1, got " + std::to_string(axis));
  if (mask && (mask->rows() != x.rows() || mask->cols() != x.cols())) {
    throw DimensionError("softmax: mask " + shape_string(mask->rows(), mask->cols()) + " does not match input " +
                         shape_string(x.rows(), x.cols()));
  }
  Matrix y;
  if (axis == 1) {
    y = softmax_rows(x.value(), mask ? &*mask : nullptr);
  } else {
    Matrix xt = x.value().transpose();
    Mask mt;
    if (mask) mt = mask->transpose();
    y = softmax_rows(xt, mask ? &mt : nullptr).transpose();
  }
  Matrix saved = y;
  return Tensor::from_op(std::move(y), {x}, [x, saved, axis](const Matrix& g) {
    Matrix gy = g.cwiseProduct(saved);
    Matrix gx;
    if (axis == 1) {
      gx = gy - saved.cwiseProduct((gy.rowwise().sum()).replicate(1, saved.cols()));
    } else {
      gx = gy - saved.cwiseProduct((gy.colwise().sum()).replicate(saved.rows(), 1));
    }
    x.accumulate_grad(gx);
  });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (static_cast<Index>(labels.size()) != logits.rows()) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.rows()) + " rows");
  }
  const Index n = logits.rows();
  Matrix probs(n, logits.cols());
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= logits.cols()) throw ContractError("cross_entropy: label out of range");
    const double peak = logits.value().row(i).maxCoeff();
    double total = 0.0;
    for (Index j = 0; j < logits.cols(); ++j) {
      probs(i, j) = std::exp(logits.value()(i, j) - peak);
      total += probs(i, j);
    }
    probs.row(i) /= total;
    loss -= logits.value()(i, label) - peak - std::log(total);
  }
  Matrix out(1, 1);
  out(0, 0) = loss / static_cast<double>(n);
  return Tensor::from_op(std::move(out), {logits}, [logits, probs, labels](const Matrix& g) {
    Matrix gl = probs;
    for (std::size_t i = 0; i < labels.size(); ++i) gl(static_cast<Index>(i), labels[i]) -= 1.0;
    logits.accumulate_grad(gl * (g(0, 0) / static_cast<double>(labels.size())));
  });
}

}  // namespace sattn
