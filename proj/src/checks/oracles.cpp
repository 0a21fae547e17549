#include "sattn/checks/oracles.hpp"

#include <algorithm>
#include <cmath>

#include "sattn/errors.hpp"

namespace sattn::oracle {

namespace {

struct Tap {
  long dx;
  long dy;
};

// Taps in kernel order: ky outer, kx inner; a single row for sequences.
std::vector<Tap> taps(const Grid& in, Index n) {
  const long r = static_cast<long>(n / 2);
  std::vector<Tap> out;
  if (in.height == 1) {
    for (long kx = 0; kx < static_cast<long>(n); ++kx) out.push_back({kx - r, 0});
    return out;
  }
  for (long ky = 0; ky < static_cast<long>(n); ++ky) {
    for (long kx = 0; kx < static_cast<long>(n); ++kx) out.push_back({kx - r, ky - r});
  }
  return out;
}

bool inside(const Grid& in, long x, long y) { return x >= 0 && y >= 0 && x < in.width && y < in.height; }

double hat(double d) { return std::max(0.0, 1.0 - std::abs(d)); }

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

Matrix conv2d(const Grid& in, const std::vector<Matrix>& kernel, Index n) {
  const std::vector<Tap> t = taps(in, n);
  if (kernel.size() != t.size()) throw ContractError("oracle conv2d: wrong number of kernel taps");
  const Index cout = kernel.front().rows();
  const Index cin = kernel.front().cols();
  Matrix out = Matrix::Zero(in.height * in.width, cout);
  for (long y = 0; y < in.height; ++y) {
    for (long x = 0; x < in.width; ++x) {
      for (std::size_t k = 0; k < t.size(); ++k) {
        const long sx = x + t[k].dx;
        const long sy = y + t[k].dy;
        if (!inside(in, sx, sy)) continue;
        for (Index o = 0; o < cout; ++o) {
          double acc = 0.0;
          for (Index i = 0; i < cin; ++i) acc += kernel[k](o, i) * in.features(sy * in.width + sx, i);
          out(y * in.width + x, o) += acc;
        }
      }
    }
  }
  return out;
}

Matrix deformable2d(const Grid& in, const std::vector<Matrix>& kernel, const std::vector<Matrix>& predictor, Index n) {
  const std::vector<Tap> t = taps(in, n);
  if (kernel.size() != t.size() || predictor.size() != t.size()) {
    throw ContractError("oracle deformable2d: wrong number of taps");
  }
  const Index cells = in.height * in.width;
  const Index cin = in.features.cols();
  const Index cout = kernel.front().rows();
  Matrix out = Matrix::Zero(cells, cout);
  for (long y = 0; y < in.height; ++y) {
    for (long x = 0; x < in.width; ++x) {
      const Index q = y * in.width + x;
      for (std::size_t k = 0; k < t.size(); ++k) {
        const Matrix shift = in.features.row(q) * predictor[k];
        const double px = static_cast<double>(x + t[k].dx) + shift(0, 0);
        const double py = static_cast<double>(y + t[k].dy) + (in.height == 1 ? 0.0 : shift(0, 1));
        Vector sample = Vector::Zero(cin);
        for (long ky = 0; ky < in.height; ++ky) {
          for (long kx = 0; kx < in.width; ++kx) {
            const double g = hat(static_cast<double>(kx) - px) * (in.height == 1 ? 1.0 : hat(static_cast<double>(ky) - py));
            if (g != 0.0) sample += g * in.features.row(ky * in.width + kx).transpose();
          }
        }
        out.row(q) += (kernel[k] * sample).transpose();
      }
    }
  }
  return out;
}

Vector sinusoid(long offset, Index dim, long clip, double base) {
  const double d = static_cast<double>(std::min(std::max(offset, -clip), clip));
  Vector out(dim);
  for (Index k = 0; k < dim; ++k) {
    const Index pair = k / 2;
    const double freq = std::exp(-std::log(base) * static_cast<double>(2 * pair) / static_cast<double>(dim));
    out(k) = (k % 2 == 0) ? std::sin(d * freq) : std::cos(d * freq);
  }
  return out;
}

Vector position_code(long dx, long dy, bool grid, Index dim, long clip) {
  if (!grid) return sinusoid(dx, dim, clip);
  Vector out(dim);
  out << sinusoid(dx, dim / 2, clip), sinusoid(dy, dim / 2, clip);
  return out;
}

std::vector<Matrix> attention_weights(const Points& queries, const Points& keys, const AttentionWeights& w,
                                      const std::string& beta, Index pos_dim, long clip) {
  if (beta.size() != 4) throw ContractError("oracle attention: beta must have four switches");
  const bool on1 = beta[0] == '1', on2 = beta[1] == '1', on3 = beta[2] == '1', on4 = beta[3] == '1';
  const Index nq = queries.content.rows();
  const Index nk = keys.content.rows();
  std::vector<Matrix> out;
  for (std::size_t m = 0; m < w.U.size(); ++m) {
    Matrix logits = Matrix::Zero(nq, nk);
    for (Index q = 0; q < nq; ++q) {
      const long qx = static_cast<long>(q % queries.width), qy = static_cast<long>(q / queries.width);
      const Vector zq = queries.content.row(q).transpose();
      for (Index k = 0; k < nk; ++k) {
        const long kx = static_cast<long>(k % keys.width), ky = static_cast<long>(k / keys.width);
        const Vector xk = keys.content.row(k).transpose();
        const Vector r = position_code(kx - qx, ky - qy, queries.grid, pos_dim, clip);
        double e = 0.0;
        if (on1) e += (w.U[m] * zq).dot(w.VC[m] * xk);
        if (on2) e += (w.U[m] * zq).dot(w.VR[m] * r);
        if (on3) e += (w.u[m] * (w.VC[m] * xk))(0, 0);
        if (on4) e += (w.v[m] * (w.VR[m] * r))(0, 0);
        logits(q, k) = e;
      }
    }
    Matrix a(nq, nk);
    for (Index q = 0; q < nq; ++q) {
      double peak = logits(q, 0);
      for (Index k = 1; k < nk; ++k) peak = std::max(peak, logits(q, k));
      double total = 0.0;
      for (Index k = 0; k < nk; ++k) total += (a(q, k) = std::exp(logits(q, k) - peak));
      for (Index k = 0; k < nk; ++k) a(q, k) /= total;
    }
    out.push_back(std::move(a));
  }
  return out;
}

Matrix attention(const Points& queries, const Points& keys, const AttentionWeights& w, const std::string& beta,
                 Index pos_dim, long clip) {
  const std::vector<Matrix> a = attention_weights(queries, keys, w, beta, pos_dim, clip);
  const Index nq = queries.content.rows();
  const Index nk = keys.content.rows();
  Matrix y = Matrix::Zero(nq, w.Wo.front().rows());
  for (std::size_t m = 0; m < a.size(); ++m) {
    for (Index q = 0; q < nq; ++q) {
      Vector mixed = Vector::Zero(w.Wv[m].rows());
      for (Index k = 0; k < nk; ++k) mixed += a[m](q, k) * (w.Wv[m] * keys.content.row(k).transpose());
      y.row(q) += (w.Wo[m] * mixed).transpose();
    }
  }
  return y;
}

namespace {

Matrix gated(const Grid& in, const DynamicWeights& w) {
  const Index cells = in.features.rows();
  const Index c = w.A.rows();
  Matrix h(cells, c);
  for (Index q = 0; q < cells; ++q) {
    for (Index o = 0; o < c; ++o) {
      double lin = w.a(0, o), gate = w.b(0, o);
      for (Index i = 0; i < in.features.cols(); ++i) {
        lin += w.A(o, i) * in.features(q, i);
        gate += w.B(o, i) * in.features(q, i);
      }
      h(q, o) = lin * sigmoid(gate);
    }
  }
  return h;
}

std::vector<Matrix> kernels_from(const Matrix& h, const DynamicWeights& w) {
  std::vector<Matrix> out;
  for (const Matrix& d : w.predictor) {
    Matrix k(h.rows(), d.cols());
    for (Index q = 0; q < h.rows(); ++q) {
      for (Index j = 0; j < d.cols(); ++j) k(q, j) = h.row(q).dot(d.col(j));
      const double peak = k.row(q).maxCoeff();
      double total = 0.0;
      for (Index j = 0; j < d.cols(); ++j) total += (k(q, j) = std::exp(k(q, j) - peak));
      k.row(q) /= total;
    }
    out.push_back(std::move(k));
  }
  return out;
}

}  // namespace

std::vector<Matrix> dynamic_kernels(const Grid& in, const DynamicWeights& w) { return kernels_from(gated(in, w), w); }

Matrix dynamic_conv(const Grid& in, const DynamicWeights& w, Index n) {
  const Matrix h = gated(in, w);
  const std::vector<Matrix> k = kernels_from(h, w);
  const std::vector<Tap> t = taps(in, n);
  const Index c = h.cols();
  const Index per_group = c / static_cast<Index>(w.predictor.size());
  Matrix mixed = Matrix::Zero(h.rows(), c);
  for (long y = 0; y < in.height; ++y) {
    for (long x = 0; x < in.width; ++x) {
      const Index q = y * in.width + x;
      for (std::size_t j = 0; j < t.size(); ++j) {
        const long sx = x + t[j].dx, sy = y + t[j].dy;
        if (!inside(in, sx, sy)) continue;
        for (Index ch = 0; ch < c; ++ch) {
          mixed(q, ch) += k[static_cast<std::size_t>(ch / per_group)](q, static_cast<Index>(j)) * h(sy * in.width + sx, ch);
        }
      }
    }
  }
  Matrix out(h.rows(), w.pointwise.rows());
  for (Index q = 0; q < h.rows(); ++q) {
    for (Index o = 0; o < w.pointwise.rows(); ++o) {
      double acc = 0.0;
      for (Index ch = 0; ch < c; ++ch) acc += w.pointwise(o, ch) * mixed(q, ch);
      out(q, o) = acc;
    }
  }
  return out;
}

}  // namespace sattn::oracle
