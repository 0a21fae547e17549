#include "sattn/dynamic_conv.hpp"

#include "sattn/errors.hpp"
#include "sattn/op_counter.hpp"

namespace sattn {

Index group_of_channel(Index c, Index in_channels, Index groups) {
  if (groups <= 0 || in_channels % groups != 0) {
    throw ContractError("group count " + std::to_string(groups) + " must divide " + std::to_string(in_channels) +
                        " channels");
  }
  if (c < 1 || c > in_channels) {
    throw ContractError("channel " + std::to_string(c) + " outside [1, " + std::to_string(in_channels) + "]");
  }
  const Index per_group = in_channels / groups;
  return (c + per_group - 1) / per_group;
}

GluParams GluParams::init(Index channels, Rng& rng) {
  GluParams p;
  p.linear = init_parameter(channels, channels, channels, rng);
  p.linear_bias = Tensor::parameter(Matrix::Zero(1, channels));
  p.gate = init_parameter(channels, channels, channels, rng);
  p.gate_bias = Tensor::parameter(Matrix::Zero(1, channels));
  return p;
}

ParameterList GluParams::parameters(const std::string& prefix) const {
  return {{prefix + "glu_A", linear}, {prefix + "glu_a", linear_bias}, {prefix + "glu_B", gate}, {prefix + "glu_b", gate_bias}};
}

Tensor glu(const Tensor& x, const GluParams& params) {
  Tensor value = add_row(matmul_nt(x, params.linear), params.linear_bias);
  Tensor gate = sigmoid(add_row(matmul_nt(x, params.gate), params.gate_bias));
  return mul(value, gate);
}

DynamicConvParams DynamicConvParams::init(const ConvKernelSpec& spec, Index in_channels, Index out_channels,
                                          Index groups, Rng& rng) {
  if (groups <= 0 || in_channels % groups != 0) {
    throw ContractError("group count " + std::to_string(groups) + " must divide " + std::to_string(in_channels) +
                        " input channels");
  }
  DynamicConvParams p;
  p.in_channels = in_channels;
  p.out_channels = out_channels;
  p.groups = groups;
  p.spec = spec;
  p.gating = GluParams::init(in_channels, rng);
  for (Index g = 0; g < groups; ++g) p.predictor.push_back(init_parameter(in_channels, spec.size(), in_channels, rng));
  p.pointwise = init_parameter(out_channels, in_channels, in_channels, rng);
  return p;
}

ParameterList DynamicConvParams::parameters(const std::string& prefix) const {
  ParameterList out = gating.parameters(prefix);
  for (std::size_t g = 0; g < predictor.size(); ++g) out.push_back({prefix + "d" + std::to_string(g), predictor[g]});
  out.push_back({prefix + "Wc", pointwise});
  return out;
}

namespace {

// keys(q, j) = index of q + p_j, or -1 outside the map.
IndexMatrix tap_table(const Layout& layout, const ConvKernelSpec& spec) {
  IndexMatrix keys(layout.count(), spec.size());
  for (Index q = 0; q < layout.count(); ++q) {
    for (Index j = 0; j < spec.size(); ++j) {
      const auto& p = spec.offsets[static_cast<std::size_t>(j)];
      const Index kx = layout.x_of(q) + p.dx;
      const Index ky = layout.y_of(q) + p.dy;
      keys(q, j) = layout.contains(kx, ky) ? layout.at(kx, ky) : -1;
    }
  }
  return keys;
}

std::vector<Tensor> predict_kernels(const Tensor& x, const DynamicConvParams& params, const std::optional<Mask>& mask) {
  if (x.cols() != params.in_channels) {
    throw ContractError("dynamic convolution expects " + std::to_string(params.in_channels) + " channels, got " +
                        std::to_string(x.cols()));
  }
  std::vector<Tensor> kernels;
  for (const auto& d : params.predictor) kernels.push_back(softmax(matmul(x, d), 1, mask));
  return kernels;
}

// out(q, c) = Σ_j K_{g(c)}(q, j) · h(keys(q, j), c)
Tensor depthwise_aggregate(const Tensor& h, const std::vector<Tensor>& kernels, const IndexMatrix& keys, Index groups) {
  const Index n = h.rows();
  const Index channels = h.cols();
  const Index per_group = channels / groups;
  const Index taps = keys.cols();
  counting::add_macs(n * taps * channels);
  Tensor stacked = concat_cols(kernels);
  const Matrix& k = stacked.value();
  Matrix out = Matrix::Zero(n, channels);
  for (Index q = 0; q < n; ++q) {
    for (Index j = 0; j < taps; ++j) {
      const Index src = keys(q, j);
      if (src < 0) continue;
      for (Index c = 0; c < channels; ++c) out(q, c) += k(q, (c / per_group) * taps + j) * h.value()(src, c);
    }
  }
  return Tensor::from_op(std::move(out), {h, stacked}, [h, stacked, keys, per_group, taps](const Matrix& g) {
    const Matrix& k = stacked.value();
    Matrix gh = Matrix::Zero(h.rows(), h.cols());
    Matrix gk = Matrix::Zero(k.rows(), k.cols());
    for (Index q = 0; q < keys.rows(); ++q) {
      for (Index j = 0; j < taps; ++j) {
        const Index src = keys(q, j);
        if (src < 0) continue;
        for (Index c = 0; c < h.cols(); ++c) {
          const Index col = (c / per_group) * taps + j;
          gh(src, c) += k(q, col) * g(q, c);
          gk(q, col) += h.value()(src, c) * g(q, c);
        }
      }
    }
    h.accumulate_grad(gh);
    stacked.accumulate_grad(gk);
  });
}

std::optional<Mask> border_mask(const IndexMatrix& keys) {
  Mask m(keys.rows(), keys.cols());
  for (Index i = 0; i < keys.size(); ++i) m.data()[i] = keys.data()[i] >= 0;
  return m;
}

}  // namespace

std::vector<Tensor> dynamic_kernel(const Tensor& x, const DynamicConvParams& params) {
  return predict_kernels(x, params, std::nullopt);
}

Matrix dynamic_weights(Index query, const std::vector<Tensor>& kernels, const Layout& layout,
                       const DynamicConvParams& params) {
  if (static_cast<Index>(kernels.size()) != params.groups) throw ContractError("one kernel per group expected");
  Matrix a = Matrix::Zero(params.in_channels, layout.count());
  for (Index j = 0; j < params.kernel_size(); ++j) {
    const auto& p = params.spec.offsets[static_cast<std::size_t>(j)];
    const Index kx = layout.x_of(query) + p.dx;
    const Index ky = layout.y_of(query) + p.dy;
    if (!layout.contains(kx, ky)) continue;
    for (Index c = 1; c <= params.in_channels; ++c) {
      const Index g = group_of_channel(c, params.in_channels, params.groups);
      a(c - 1, layout.at(kx, ky)) = kernels[static_cast<std::size_t>(g - 1)].value()(query, j);
    }
  }
  return a;
}

Tensor dynamic_forward(const Tensor& x, const Layout& layout, const DynamicConvParams& params) {
  if (x.rows() != layout.count()) throw ContractError("input rows do not match the layout");
  if (layout.dims() != params.spec.dims) throw ContractError("kernel and layout dimensionality differ");
  const IndexMatrix keys = tap_table(layout, params.spec);
  Tensor h = glu(x, params.gating);
  std::vector<Tensor> kernels =
      predict_kernels(h, params, params.renormalize_at_border ? border_mask(keys) : std::nullopt);
  return matmul_nt(depthwise_aggregate(h, kernels, keys, params.groups), params.pointwise);
}

}  // namespace sattn
