#pragma once

#include <string>
#include <vector>

#include "sattn/rng.hpp"
#include "sattn/tensor.hpp"

namespace sattn {

/// Learnable leaf plus its learning-rate multiplier.
struct Parameter {
  std::string name;
  Tensor tensor;
  double lr_multiplier = 1.0;
};

using ParameterList = std::vector<Parameter>;

/// rows×cols matrix with entries uniform in ±sqrt(1/fan_in).
Matrix uniform_init(Index rows, Index cols, Index fan_in, Rng& rng);

/// Grad-required leaf initialised with uniform_init.
Tensor init_parameter(Index rows, Index cols, Index fan_in, Rng& rng);

/// Plain tensors of a parameter list, in order.
std::vector<Tensor> tensors_of(const ParameterList& params);

/// Heavy-ball momentum gradient descent:
///   v <- momentum·v + grad,  p <- p - rate·multiplier·v
class MomentumSgd {
 public:
  MomentumSgd(double rate, double momentum) : rate_(rate), momentum_(momentum) {}

  /// Applies one update from the parameters' accumulated gradients, then
  /// zeroes them.
  void step(ParameterList& params);

  double rate() const { return rate_; }
  double momentum() const { return momentum_; }

 private:
  double rate_;
  double momentum_;
  std::vector<Matrix> velocity_;
};

}  // namespace sattn
