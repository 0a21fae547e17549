#include "sattn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sattn/errors.hpp"
#include "sattn/op_counter.hpp"

namespace sattn {
namespace {

double evaluate(const LossFn& f) {
  Tensor loss = f();
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ContractError("gradient check needs a scalar loss, got " + shape_string(loss.rows(), loss.cols()));
  }
  const double v = loss.item();
  if (!std::isfinite(v)) throw NumericError("gradient check: loss is not finite");
  return v;
}

}  // namespace

std::vector<Matrix> analytic_gradients(const LossFn& f, std::vector<Tensor>& params) {
  NoCountScope quiet;
  for (auto& p : params) {
    if (!p.is_leaf() || !p.requires_grad()) throw ContractError("gradient check parameters must be grad-required leaves");
    p.zero_grad();
  }
  Tensor loss = f();
  if (!std::isfinite(loss.item())) throw NumericError("gradient check: loss is not finite");
  backward(loss);
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (auto& p : params) {
    grads.push_back(p.grad());
    if (!grads.back().allFinite()) throw NumericError("gradient check: analytic gradient is not finite");
    p.zero_grad();
  }
  return grads;
}

Matrix numeric_gradient(const LossFn& f, Tensor& param, double step) {
  NoCountScope quiet;
  Matrix& v = param.mutable_value();
  Matrix g(v.rows(), v.cols());
  for (Index i = 0; i < v.rows(); ++i) {
    for (Index j = 0; j < v.cols(); ++j) {
      const double saved = v(i, j);
      v(i, j) = saved + step;
      const double up = evaluate(f);
      v(i, j) = saved - step;
      const double down = evaluate(f);
      v(i, j) = saved;
      g(i, j) = (up - down) / (2.0 * step);
    }
  }
  return g;
}

double max_relative_error(const std::vector<Matrix>& analytic, const std::vector<Matrix>& numeric) {
  if (analytic.size() != numeric.size()) throw ContractError("max_relative_error: gradient lists differ in length");
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const Matrix& a = analytic[k];
    const Matrix& n = numeric[k];
    if (a.rows() != n.rows() || a.cols() != n.cols()) {
      throw DimensionError("max_relative_error: gradient " + std::to_string(k) + " shapes differ");
    }
    for (Index i = 0; i < a.size(); ++i) {
      const double av = a.data()[i];
      const double nv = n.data()[i];
      if (!std::isfinite(av) || !std::isfinite(nv)) throw NumericError("max_relative_error: non-finite gradient");
      worst = std::max(worst, std::abs(av - nv) / std::max({kRelativeFloor, std::abs(av), std::abs(nv)}));
    }
  }
  return worst;
}

double finite_diff_check(const LossFn& f, std::vector<Tensor> params, double step) {
  std::vector<Matrix> analytic = analytic_gradients(f, params);
  std::vector<Matrix> numeric;
  numeric.reserve(params.size());
  for (auto& p : params) numeric.push_back(numeric_gradient(f, p, step));
  return max_relative_error(analytic, numeric);
}

}  // namespace sattn
