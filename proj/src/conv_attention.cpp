#include "sattn/conv_attention.hpp"

#include "sattn/errors.hpp"
#include "sattn/op_counter.hpp"

namespace sattn {

ConvKernelSpec ConvKernelSpec::square(Index n) {
  if (n <= 0 || n % 2 == 0) throw ContractError("kernel extent must be a positive odd number, got " + std::to_string(n));
  ConvKernelSpec spec;
  spec.dims = 2;
  const Index r = n / 2;
  for (Index dy = -r; dy <= r; ++dy) {
    for (Index dx = -r; dx <= r; ++dx) spec.offsets.push_back({dx, dy});
  }
  return spec;
}

ConvKernelSpec ConvKernelSpec::line(Index n) {
  if (n <= 0 || n % 2 == 0) throw ContractError("kernel extent must be a positive odd number, got " + std::to_string(n));
  ConvKernelSpec spec;
  spec.dims = 1;
  for (Index dx = -(n / 2); dx <= n / 2; ++dx) spec.offsets.push_back({dx, 0});
  return spec;
}

Index ConvKernelSpec::center() const {
  for (Index m = 0; m < size(); ++m) {
    const auto& o = offsets[static_cast<std::size_t>(m)];
    if (o.dx == 0 && o.dy == 0) return m;
  }
  throw ContractError("kernel has no zero offset");
}

Matrix SparseWeights::dense(Index num_keys) const {
  Matrix out = Matrix::Zero(keys.rows(), num_keys);
  for (Index q = 0; q < keys.rows(); ++q) {
    for (Index j = 0; j < keys.cols(); ++j) {
      if (keys(q, j) >= 0) out(q, keys(q, j)) += weights.value()(q, j);
    }
  }
  return out;
}

Tensor sparse_aggregate(const Tensor& x, const SparseWeights& sw) {
  const IndexMatrix& keys = sw.keys;
  if (sw.weights.rows() != keys.rows() || sw.weights.cols() != keys.cols()) {
    throw DimensionError("sparse_aggregate: weights " + shape_string(sw.weights.rows(), sw.weights.cols()) +
                         " do not match key table " + shape_string(keys.rows(), keys.cols()));
  }
  if (keys.size() > 0 && keys.maxCoeff() >= x.rows()) throw ContractError("sparse_aggregate: key index out of range");
  counting::add_macs(keys.size() * x.cols());
  const Matrix& w = sw.weights.value();
  Matrix out = Matrix::Zero(keys.rows(), x.cols());
  for (Index q = 0; q < keys.rows(); ++q) {
    for (Index j = 0; j < keys.cols(); ++j) {
      if (keys(q, j) >= 0) out.row(q) += w(q, j) * x.value().row(keys(q, j));
    }
  }
  Tensor weights = sw.weights;
  return Tensor::from_op(std::move(out), {x, weights}, [x, weights, keys](const Matrix& g) {
    if (x.requires_grad()) {
      Matrix gx = Matrix::Zero(x.rows(), x.cols());
      for (Index q = 0; q < keys.rows(); ++q) {
        for (Index j = 0; j < keys.cols(); ++j) {
          if (keys(q, j) >= 0) gx.row(keys(q, j)) += weights.value()(q, j) * g.row(q);
        }
      }
      x.accumulate_grad(gx);
    }
    if (weights.requires_grad()) {
      Matrix gw = Matrix::Zero(keys.rows(), keys.cols());
      for (Index q = 0; q < keys.rows(); ++q) {
        for (Index j = 0; j < keys.cols(); ++j) {
          if (keys(q, j) >= 0) gw(q, j) = g.row(q).dot(x.value().row(keys(q, j)));
        }
      }
      weights.accumulate_grad(gw);
    }
  });
}

namespace {

void require_layout_kind(const Layout& layout, const ConvKernelSpec& spec) {
  if (layout.dims() != spec.dims) {
    throw ContractError("kernel is " + std::to_string(spec.dims) + "-d but the layout is " +
                        std::to_string(layout.dims()) + "-d");
  }
}

}  // namespace

std::vector<SparseWeights> regular_conv_weights(const Layout& layout, const ConvKernelSpec& spec) {
  require_layout_kind(layout, spec);
  std::vector<SparseWeights> out;
  for (const auto& p : spec.offsets) {
    SparseWeights sw;
    sw.keys.resize(layout.count(), 1);
    for (Index q = 0; q < layout.count(); ++q) {
      const Index kx = layout.x_of(q) + p.dx;
      const Index ky = layout.y_of(q) + p.dy;
      sw.keys(q, 0) = layout.contains(kx, ky) ? layout.at(kx, ky) : -1;
    }
    sw.weights = Tensor::constant(Matrix::Ones(layout.count(), 1));
    out.push_back(std::move(sw));
  }
  return out;
}

ConvParams ConvParams::init(const ConvKernelSpec& spec, Index in_channels, Index out_channels, Rng& rng) {
  ConvParams p;
  for (Index m = 0; m < spec.size(); ++m) p.kernel.push_back(init_parameter(out_channels, in_channels, in_channels * spec.size(), rng));
  return p;
}

ParameterList ConvParams::parameters(const std::string& prefix) const {
  ParameterList out;
  for (std::size_t m = 0; m < kernel.size(); ++m) out.push_back({prefix + "W" + std::to_string(m), kernel[m]});
  return out;
}

namespace {

Tensor project_and_sum(const Tensor& x, const std::vector<SparseWeights>& weights, const ConvParams& params) {
  if (weights.size() != params.kernel.size()) throw ContractError("kernel parameter count does not match the sampling points");
  Tensor y;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    Tensor head = matmul_nt(sparse_aggregate(x, weights[m]), params.kernel[m]);
    y = y.defined() ? add(y, head) : head;
  }
  return y;
}

}  // namespace

Tensor regular_conv_forward(const Tensor& x, const Layout& layout, const ConvParams& params, const ConvKernelSpec& spec) {
  if (x.rows() != layout.count()) throw ContractError("input rows do not match the layout");
  return project_and_sum(x, regular_conv_weights(layout, spec), params);
}

DeformableParams DeformableParams::init(const ConvKernelSpec& spec, Index in_channels, Index out_channels, Rng& rng,
                                        bool with_gate) {
  DeformableParams p;
  p.conv = ConvParams::init(spec, in_channels, out_channels, rng);
  for (Index m = 0; m < spec.size(); ++m) p.offset_predictor.push_back(Tensor::parameter(Matrix::Zero(in_channels, spec.dims)));
  if (with_gate) p.gate = Tensor::scalar(0.0, true);
  return p;
}

ParameterList DeformableParams::parameters(const std::string& prefix) const {
  ParameterList out = conv.parameters(prefix);
  for (std::size_t m = 0; m < offset_predictor.size(); ++m) {
    out.push_back({prefix + "w" + std::to_string(m), offset_predictor[m], kOffsetLearningRateMultiplier});
  }
  if (gate.defined()) out.push_back({prefix + "gate", gate});
  return out;
}

SparseWeights bilinear_weights(const Tensor& locations, const Layout& layout) {
  const int dims = layout.dims();
  if (locations.cols() != dims) {
    throw DimensionError("bilinear_weights: locations have " + std::to_string(locations.cols()) + " columns for a " +
                         std::to_string(dims) + "-d layout");
  }
  const Index n = locations.rows();
  const Index corners = Index{1} << dims;
  const Matrix& loc = locations.value();
  for (Index i = 0; i < loc.size(); ++i) {
    if (!std::isfinite(loc.data()[i])) throw NumericError("bilinear_weights: non-finite sampling location");
  }

  SparseWeights sw;
  sw.keys.resize(n, corners);
  Matrix w(n, corners);
  // d w / d loc, one column block per axis.
  Matrix dw(n, corners * dims);
  for (Index q = 0; q < n; ++q) {
    const double lx = loc(q, 0);
    const double ly = dims == 2 ? loc(q, 1) : 0.0;
    const auto x0 = static_cast<Index>(std::floor(lx));
    const auto y0 = static_cast<Index>(std::floor(ly));
    for (Index c = 0; c < corners; ++c) {
      const Index kx = x0 + (c & 1);
      const Index ky = dims == 2 ? y0 + (c >> 1) : 0;
      sw.keys(q, c) = layout.contains(kx, ky) ? layout.at(kx, ky) : -1;
      const double gx = bilinear_g<double>(static_cast<double>(kx), lx);
      // Right derivative of the hat in the sampling coordinate.
      const double sx = (c & 1) ? 1.0 : -1.0;
      if (dims == 2) {
        const double gy = bilinear_g<double>(static_cast<double>(ky), ly);
        const double sy = (c >> 1) ? 1.0 : -1.0;
        w(q, c) = gx * gy;
        dw(q, c) = sx * gy;
        dw(q, corners + c) = gx * sy;
      } else {
        w(q, c) = gx;
        dw(q, c) = sx;
      }
    }
  }
  counting::add_macs(n * corners * (dims - 1));
  sw.weights = Tensor::from_op(std::move(w), {locations}, [locations, dw, corners, dims](const Matrix& g) {
    Matrix gl = Matrix::Zero(locations.rows(), dims);
    for (Index q = 0; q < g.rows(); ++q) {
      for (int a = 0; a < dims; ++a) {
        gl(q, a) = g.row(q).dot(dw.block(q, a * corners, 1, corners).row(0));
      }
    }
    locations.accumulate_grad(gl);
  });
  return sw;
}

std::vector<SparseWeights> deformable_weights(const Tensor& x, const Layout& layout, const DeformableParams& params,
                                              const ConvKernelSpec& spec) {
  require_layout_kind(layout, spec);
  if (x.rows() != layout.count()) throw ContractError("input rows do not match the layout");
  if (params.offset_predictor.size() != spec.offsets.size()) {
    throw ContractError("offset predictor count does not match the sampling points");
  }
  const int dims = spec.dims;
  std::vector<SparseWeights> out;
  for (std::size_t m = 0; m < spec.offsets.size(); ++m) {
    const auto& p = spec.offsets[m];
    Matrix base(layout.count(), dims);
    for (Index q = 0; q < layout.count(); ++q) {
      base(q, 0) = static_cast<double>(layout.x_of(q) + p.dx);
      if (dims == 2) base(q, 1) = static_cast<double>(layout.y_of(q) + p.dy);
    }
    Tensor displacement = matmul(x, params.offset_predictor[m]);
    out.push_back(bilinear_weights(add(Tensor::constant(std::move(base)), displacement), layout));
  }
  return out;
}

Tensor deformable_forward(const Tensor& x, const Layout& layout, const DeformableParams& params,
                          const ConvKernelSpec& spec) {
  return project_and_sum(x, deformable_weights(x, layout, params, spec), params.conv);
}

Tensor deformable_unit_forward(const Tensor& x, const Layout& layout, const DeformableParams& params,
                               const ConvKernelSpec& spec) {
  if (!params.gate.defined()) throw ContractError("deformable unit needs a gate parameter");
  Tensor y = deformable_forward(x, layout, params, spec);
  if (y.cols() != x.cols()) throw ContractError("deformable unit must preserve the channel count");
  return add(x, mul_scalar(y, params.gate));
}

}  // namespace sattn
