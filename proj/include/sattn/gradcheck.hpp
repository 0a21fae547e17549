#pragma once

#include <functional>
#include <vector>

#include "sattn/tensor.hpp"

namespace sattn {

/// Builds a fresh graph from the current parameter values and returns a 1×1 loss.
using LossFn = std::function<Tensor()>;

/// d loss / d p for each parameter, via one backward pass. Parameter grads
/// are zeroed before and after.
std::vector<Matrix> analytic_gradients(const LossFn& f, std::vector<Tensor>& params);

/// Central differences, one entry at a time: (f(p + h) - f(p - h)) / 2h.
Matrix numeric_gradient(const LossFn& f, Tensor& param, double step = 1e-5);

/// Magnitudes below this are compared on an absolute footing.
inline constexpr double kRelativeFloor = 1e-4;

/// max over entries of |analytic - numeric| / max(kRelativeFloor, |analytic|, |numeric|).
double max_relative_error(const std::vector<Matrix>& analytic, const std::vector<Matrix>& numeric);

/// Runs both routes and compares them. Throws NumericError on non-finite
/// loss or gradient values.
double finite_diff_check(const LossFn& f, std::vector<Tensor> params, double step = 1e-5);

}  // namespace sattn
