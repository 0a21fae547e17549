#include "sattn/params.hpp"

#include <cmath>

#include "sattn/errors.hpp"

namespace sattn {

Matrix uniform_init(Index rows, Index cols, Index fan_in, Rng& rng) {
  if (fan_in <= 0) throw ContractError("uniform_init: fan_in must be positive");
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

Tensor init_parameter(Index rows, Index cols, Index fan_in, Rng& rng) {
  return Tensor::parameter(uniform_init(rows, cols, fan_in, rng));
}

std::vector<Tensor> tensors_of(const ParameterList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

void MomentumSgd::step(ParameterList& params) {
  if (velocity_.empty()) {
    for (const auto& p : params) velocity_.push_back(Matrix::Zero(p.tensor.rows(), p.tensor.cols()));
  }
  if (velocity_.size() != params.size()) throw ContractError("MomentumSgd: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = params[i].tensor;
    velocity_[i] = momentum_ * velocity_[i] + t.grad();
    t.mutable_value() -= (rate_ * params[i].lr_multiplier) * velocity_[i];
    t.zero_grad();
  }
}

}  // namespace sattn
